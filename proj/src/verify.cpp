#include "mfnn/verify.hpp"

#include <algorithm>
#include <cmath>

#include "mfnn/models.hpp"
#include "mfnn/rng.hpp"

namespace mfnn::verify {

namespace {

bool near_kink(const nnet::NetworkParams& p, const nnet::Matrix& x, double margin) {
    if (p.arch.hidden_activation != nnet::Activation::ReLU) return false;
    nnet::Matrix a = x.transpose();
    for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
        nnet::Matrix z = p.layers[l].weights * a;
        z.colwise() += p.layers[l].bias;
        if ((z.array().abs() < margin).any()) return true;
        a = z.cwiseMax(0.0);
    }
    return false;
}

Check make(std::string name, double v, double lo, double hi) {
    return {std::move(name), v, lo, hi, v >= lo && v <= hi};
}

}  // namespace

double gradient_discrepancy(const nnet::Architecture& arch, std::size_t cases, std::uint64_t seed,
                            double fd_step, double floor, double kink_margin) {
    SplitMix64 rng(seed);
    double worst = 0.0;
    for (std::size_t c = 0; c < cases; ++c) {
        nnet::NetworkParams p;
        nnet::Matrix x, y;
        const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.below(8));
        do {
            p = nnet::init_network(arch, rng.next());
            for (auto& l : p.layers)
                for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.uniform(-0.5, 0.5);
            x.resize(batch, static_cast<Eigen::Index>(arch.input_width));
            y.resize(batch, static_cast<Eigen::Index>(arch.output_width));
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
            for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform(-1.0, 1.0);
        } while (near_kink(p, x, kink_margin));

        const auto lg = nnet::loss_and_gradient(p, x, y);
        const std::vector<double> g = lg.grads.flatten();
        std::vector<double> theta = p.flatten();
        nnet::NetworkParams q = p;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double orig = theta[k];
            theta[k] = orig + fd_step;
            q.unflatten(theta);
            const double up = nnet::mean_squared_error(q, x, y);
            theta[k] = orig - fd_step;
            q.unflatten(theta);
            const double down = nnet::mean_squared_error(q, x, y);
            theta[k] = orig;
            const double fd = (up - down) / (2.0 * fd_step);
            const double denom = std::max({std::abs(fd), std::abs(g[k]), floor});
            worst = std::max(worst, std::abs(fd - g[k]) / denom);
        }
    }
    return worst;
}

double ode_observed_order(double h_coarse, double h_fine, std::size_t draws, std::uint64_t seed) {
    double sum = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const double y = -1.0 + 2.0 * SplitMix64::to_unit(SplitMix64::at(seed, k));
        const double exact = models::ode_exact(100.0, y);
        const double ec = std::abs(models::ode_solve_rk2(y, h_coarse) - exact);
        const double ef = std::abs(models::ode_solve_rk2(y, h_fine) - exact);
        sum += std::log2(ec / ef);
    }
    return sum / static_cast<double>(draws) / std::log2(h_coarse / h_fine);
}

double wave_observed_order(double h_coarse, double h_fine, std::size_t draws, std::uint64_t seed) {
    auto l2_error = [](const models::Vec2& y, double h) {
        const models::WaveField f = models::wave_solve_field(y, h);
        double s = 0.0;
        for (std::size_t i = 0; i < f.points_per_side; ++i)
            for (std::size_t j = 0; j < f.points_per_side; ++j) {
                const double e = f.value(i, j) - models::wave_exact(f.time, {f.coordinate(i), f.coordinate(j)}, y);
                s += e * e;
            }
        return std::sqrt(s * h * h);
    };
    double sum = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const models::Vec2 y{10.0 + SplitMix64::to_unit(SplitMix64::at(seed, 2 * k)),
                             4.0 + 2.0 * SplitMix64::to_unit(SplitMix64::at(seed, 2 * k + 1))};
        sum += std::log2(l2_error(y, h_coarse) / l2_error(y, h_fine));
    }
    return sum / static_cast<double>(draws) / std::log2(h_coarse / h_fine);
}

double ode_residual_max(std::size_t points, std::uint64_t seed) {
    SplitMix64 rng(seed);
    double worst = 0.0;
    constexpr double d = 1e-6;
    for (std::size_t k = 0; k < points; ++k) {
        const double t = rng.uniform(0.0, 100.0), y = rng.uniform(-1.0, 1.0);
        const double ut = (models::ode_exact(t + d, y) - models::ode_exact(t - d, y)) / (2.0 * d);
        worst = std::max(worst, std::abs(ut + 0.5 * models::ode_exact(t, y) - models::ode_forcing(t, y)));
    }
    return worst;
}

double wave_residual_max(std::size_t points, std::uint64_t seed) {
    SplitMix64 rng(seed);
    double worst = 0.0;
    constexpr double d = 1e-4;
    for (std::size_t k = 0; k < points; ++k) {
        const double t = rng.uniform(0.0, 30.0);
        const models::Vec2 x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const models::Vec2 y{rng.uniform(10.0, 11.0), rng.uniform(4.0, 6.0)};
        auto u = [&](double tt, double a, double b) { return models::wave_exact(tt, {a, b}, y); };
        const double c = u(t, x[0], x[1]);
        const double utt = (u(t + d, x[0], x[1]) - 2.0 * c + u(t - d, x[0], x[1])) / (d * d);
        const double uxx = (u(t, x[0] + d, x[1]) - 2.0 * c + u(t, x[0] - d, x[1])) / (d * d);
        const double uyy = (u(t, x[0], x[1] + d) - 2.0 * c + u(t, x[0], x[1] - d)) / (d * d);
        // truncation of the second differences grows like d^2 y1^4 / 12, so
        // the residual is measured against the size of the operator terms
        const double scale = 1.0 + y[0] * y[0] + 2.0 * y[1] * y[1];
        worst = std::max(worst, std::abs(utt - uxx - uyy - models::wave_forcing(t, x, y)) / scale);
    }
    return worst;
}

std::vector<Check> run_property_suite(std::uint64_t seed, bool quick) {
    std::vector<Check> out;
    const std::size_t cases = quick ? 10 : 50;
    const nnet::Architecture archs[] = {
        {1, {20, 20, 20, 20}, 1}, {2, {20, 20, 20, 20}, 1},
        {2, {30, 30, 30, 30}, 1}, {3, {30, 30, 30, 30}, 1}};
    for (const auto& a : archs) {
        const std::string name = "gradient " + std::to_string(a.input_width) + "->" +
                                 std::to_string(a.hidden_widths.size()) + "x" +
                                 std::to_string(a.hidden_widths[0]) + "->1";
        out.push_back(make(name, gradient_discrepancy(a, cases, derive_seed(seed, SeedPhase::Calibration, a.input_width * 100 + a.hidden_widths[0])), 0.0, 1e-4));
    }
    const std::size_t draws = quick ? 5 : 20;
    out.push_back(make("rk2 order h=0.025/0.0125", ode_observed_order(0.025, 0.0125, draws, seed), 1.7, 2.3));
    out.push_back(make("rk2 order h=0.02/0.01", ode_observed_order(0.02, 0.01, draws, seed + 1), 1.7, 2.3));
    out.push_back(make("wave order h=1/32/1/64", wave_observed_order(1.0 / 32, 1.0 / 64, draws, seed), 1.7, 2.3));
    if (!quick)
        out.push_back(make("wave order h=1/64/1/128", wave_observed_order(1.0 / 64, 1.0 / 128, draws, seed), 1.7, 2.3));
    out.push_back(make("ode residual", ode_residual_max(1000, seed), 0.0, 1e-6));
    out.push_back(make("wave residual", wave_residual_max(500, seed), 0.0, 1e-5));
    return out;
}

}  // namespace mfnn::verify
