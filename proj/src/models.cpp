#include "mfnn/models.hpp"

#include <cmath>
#include <mutex>

#include "mfnn/errors.hpp"
#include "mfnn/quadrature.hpp"

namespace mfnn::models {

namespace {

// Integer n with n ~ value, or throw when value is not integral to ~1e-9.
std::size_t integral_count(double value, const char* what) {
    const double r = std::round(value);
    if (!(r >= 1.0) || std::abs(value - r) > 1e-9 * std::max(1.0, std::abs(value)))
        throw InputError(std::string("wave: ") + what + " is not an integer (" + std::to_string(value) + ")");
    return static_cast<std::size_t>(r);
}

}  // namespace

std::string to_string(ModelId id) {
    switch (id) {
        case ModelId::Ode15: return "ode";
        case ModelId::Wave16: return "wave";
    }
    return "unknown";
}

ModelId model_id_from_string(const std::string& name) {
    if (name == "ode") return ModelId::Ode15;
    if (name == "wave") return ModelId::Wave16;
    throw InputError("unknown model '" + name + "' (expected 'ode' or 'wave')");
}

void BiFidelitySpec::validate() const {
    if (!(h_hf > 0.0) || !(h_lf > 0.0)) throw InputError("bi-fidelity: steps must be positive");
    if (!(h_hf < h_lf)) throw InputError("bi-fidelity: h_hf must be smaller than h_lf");
    if (!(order_q > 0.0)) throw InputError("bi-fidelity: order must be positive");
    const auto& m = model_catalog(model_id);
    m.check_step(h_lf);
    m.check_step(h_hf);
}

void OdeSpec::validate() const {
    if (!(horizon > 0.0)) throw InputError("ode: horizon must be positive");
    if (!(y_lower < y_upper)) throw InputError("ode: parameter bounds not ordered");
}

void WaveSpec::validate() const {
    if (!(horizon > 0.0)) throw InputError("wave: horizon must be positive");
    if (!(x_lower < x_upper)) throw InputError("wave: spatial bounds not ordered");
    if (!(dt_over_h > 0.0)) throw InputError("wave: dt/h must be positive");
    parameter_domain.validate();
    if (parameter_domain.dim() != 2) throw InputError("wave: parameter domain must be 2-D");
}

// ---- ODE -------------------------------------------------------------------

double ode_exact(double t, double y) {
    return 0.5 + 2.0 * std::sin(12.0 * y) + 6.0 * std::sin(2.0 * t) * std::sin(10.0 * y) * (1.0 + 2.0 * y * y);
}

double ode_exact_dt(double t, double y) {
    return 12.0 * std::cos(2.0 * t) * std::sin(10.0 * y) * (1.0 + 2.0 * y * y);
}

double ode_forcing(double t, double y, double decay) {
    return ode_exact_dt(t, y) + decay * ode_exact(t, y);
}

double ode_solve_rk2(double y, double h, const OdeSpec& spec) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InputError("ode_solve_rk2: step must be positive");
    spec.validate();
    const auto n = static_cast<std::size_t>(std::max(1.0, std::round(spec.horizon / h)));
    const double dt = spec.horizon / static_cast<double>(n);
    const double lambda = spec.decay;

    // The forcing separates as a(y) cos(2t) + b(y) sin(2t) + c(y).
    const double s10 = std::sin(10.0 * y) * (1.0 + 2.0 * y * y);
    const double base = 0.5 + 2.0 * std::sin(12.0 * y);
    auto rhs = [&](double t, double u) {
        const double s = std::sin(2.0 * t);
        const double c = std::cos(2.0 * t);
        const double f = 12.0 * c * s10 + lambda * (base + 6.0 * s * s10);
        return f - lambda * u;
    };

    double u = ode_exact(0.0, y);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double k1 = rhs(t, u);
        const double k2 = rhs(t + 0.5 * dt, u + 0.5 * dt * k1);
        u += dt * k2;
    }
    return u;
}

double ode_qoi(double y, double h, const OdeSpec& spec) { return std::abs(ode_solve_rk2(y, h, spec)); }

double ode_qoi_exact(double y, const OdeSpec& spec) { return std::abs(ode_exact(spec.horizon, y)); }

// ---- Wave ------------------------------------------------------------------

double wave_exact(double t, Vec2 x, Vec2 y) {
    return std::sin(y[0] * t - y[1] * x[0]) * std::sin(y[1] * x[1]);
}

double wave_exact_dt(double t, Vec2 x, Vec2 y) {
    return y[0] * std::cos(y[0] * t - y[1] * x[0]) * std::sin(y[1] * x[1]);
}

double wave_forcing(double t, Vec2 x, Vec2 y) {
    return (2.0 * y[1] * y[1] - y[0] * y[0]) * wave_exact(t, x, y);
}

double WaveField::coordinate(std::size_t i) const {
    const auto cells = static_cast<double>(points_per_side - 1);
    return x_lower + (x_upper - x_lower) * static_cast<double>(i) / cells;
}

std::size_t wave_cells_for(double h, const WaveSpec& spec) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InputError("wave: grid length must be positive");
    spec.validate();
    const double length = spec.x_upper - spec.x_lower;
    const std::size_t cells = integral_count(length / h, "domain length / h");
    for (double p : spec.probe) {
        if (p < spec.x_lower || p > spec.x_upper) throw InputError("wave: probe outside the domain");
        integral_count((p - spec.x_lower) / h + 1.0, "probe offset / h");
    }
    integral_count(spec.horizon / (spec.dt_over_h * h), "T / dt");
    if (cells < 2) throw InputError("wave: grid must have an interior point");
    return cells;
}

WaveField wave_solve_field(Vec2 y, double h, const WaveSpec& spec) {
    const std::size_t cells = wave_cells_for(h, spec);
    const std::size_t n = cells + 1;
    const double length = spec.x_upper - spec.x_lower;
    const double dx = length / static_cast<double>(cells);
    const std::size_t steps = integral_count(spec.horizon / (spec.dt_over_h * h), "T / dt");
    const double dt = spec.horizon / static_cast<double>(steps);

    const double y1 = y[0];
    const double y2 = y[1];
    const double coef = 2.0 * y2 * y2 - y1 * y1;

    // u(t, x) = [sin(y1 t) cos(y2 x1) - cos(y1 t) sin(y2 x1)] sin(y2 x2).
    std::vector<double> x(n), cos1(n), sin1(n), sin2(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = spec.x_lower + length * static_cast<double>(i) / static_cast<double>(cells);
        cos1[i] = std::cos(y2 * x[i]);
        sin1[i] = std::sin(y2 * x[i]);
        sin2[i] = std::sin(y2 * x[i]);
    }
    auto exact_at = [&](double st, double ct, std::size_t i, std::size_t j) {
        return (st * cos1[i] - ct * sin1[i]) * sin2[j];
    };

    std::vector<double> prev(n * n), cur(n * n), next(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) prev[i * n + j] = exact_at(0.0, 1.0, i, j);

    const double inv_h2 = 1.0 / (dx * dx);
    const double dt2 = dt * dt;

    auto set_boundary = [&](std::vector<double>& u, double t) {
        const double st = std::sin(y1 * t);
        const double ct = std::cos(y1 * t);
        for (std::size_t k = 0; k < n; ++k) {
            u[0 * n + k] = exact_at(st, ct, 0, k);
            u[(n - 1) * n + k] = exact_at(st, ct, n - 1, k);
            u[k * n + 0] = exact_at(st, ct, k, 0);
            u[k * n + (n - 1)] = exact_at(st, ct, k, n - 1);
        }
    };

    // Taylor start: u1 = u0 + dt g2 + dt^2 / 2 (Lap_h u0 + f0).
    for (std::size_t i = 1; i + 1 < n; ++i) {
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const std::size_t c = i * n + j;
            const double lap = (prev[c - n] + prev[c + n] + prev[c - 1] + prev[c + 1] - 4.0 * prev[c]) * inv_h2;
            const double g2 = y1 * cos1[i] * sin2[j];
            cur[c] = prev[c] + dt * g2 + 0.5 * dt2 * (lap + coef * prev[c]);
        }
    }
    set_boundary(cur, dt);

    for (std::size_t step = 1; step < steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        const double st = std::sin(y1 * t);
        const double ct = std::cos(y1 * t);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double a = coef * (st * cos1[i] - ct * sin1[i]);
            const double* up = &cur[(i - 1) * n];
            const double* uc = &cur[i * n];
            const double* ud = &cur[(i + 1) * n];
            const double* uo = &prev[i * n];
            double* un = &next[i * n];
            for (std::size_t j = 1; j + 1 < n; ++j) {
                const double lap = (up[j] + ud[j] + uc[j - 1] + uc[j + 1] - 4.0 * uc[j]) * inv_h2;
                un[j] = 2.0 * uc[j] - uo[j] + dt2 * (lap + a * sin2[j]);
            }
        }
        set_boundary(next, static_cast<double>(step + 1) * dt);
        std::swap(prev, cur);
        std::swap(cur, next);
    }

    WaveField field;
    field.points_per_side = n;
    field.h = dx;
    field.x_lower = spec.x_lower;
    field.x_upper = spec.x_upper;
    field.time = static_cast<double>(steps) * dt;
    field.values = std::move(cur);
    return field;
}

double wave_solve_fd(Vec2 y, double h, const WaveSpec& spec) {
    const WaveField field = wave_solve_field(y, h, spec);
    const auto cells = static_cast<double>(field.points_per_side - 1);
    const double length = spec.x_upper - spec.x_lower;
    const auto i = static_cast<std::size_t>(std::llround((spec.probe[0] - spec.x_lower) / length * cells));
    const auto j = static_cast<std::size_t>(std::llround((spec.probe[1] - spec.x_lower) / length * cells));
    return field.value(i, j);
}

double wave_qoi(Vec2 y, double h, const WaveSpec& spec) { return std::abs(wave_solve_fd(y, h, spec)); }

double wave_qoi_exact(Vec2 y, const WaveSpec& spec) {
    return std::abs(wave_exact(spec.horizon, spec.probe, y));
}

// ---- Reference statistics ----------------------------------------------------

double ode_reference_mean(const OdeSpec& spec) {
    const QuadratureRule rule = composite_gauss_legendre(spec.y_lower, spec.y_upper, 2000, 50);
    double sum = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) sum += rule.weights[k] * ode_qoi_exact(rule.nodes[k], spec);
    return sum / (spec.y_upper - spec.y_lower);
}

double wave_reference_mean(const WaveSpec& spec) {
    const Box& g = spec.parameter_domain;
    // |sin(30 y1 - ...)| has ~10 kinks along y1; panels keep each kink local.
    const QuadratureRule r1 = composite_gauss_legendre(g.lower[0], g.upper[0], 512, 16);
    const QuadratureRule r2 = composite_gauss_legendre(g.lower[1], g.upper[1], 64, 8);
    double sum = 0.0;
    for (std::size_t a = 0; a < r1.nodes.size(); ++a) {
        double inner = 0.0;
        for (std::size_t b = 0; b < r2.nodes.size(); ++b)
            inner += r2.weights[b] * wave_qoi_exact({r1.nodes[a], r2.nodes[b]}, spec);
        sum += r1.weights[a] * inner;
    }
    return sum / ((g.upper[0] - g.lower[0]) * (g.upper[1] - g.lower[1]));
}

// ---- Catalog ---------------------------------------------------------------

namespace {

class OdeModel final : public ForwardModel {
public:
    ModelId id() const override { return ModelId::Ode15; }
    Box parameter_domain() const override { return {{spec_.y_lower}, {spec_.y_upper}}; }
    double cost_exponent() const override { return 1.0; }

    void check_step(double h) const override {
        if (!(h > 0.0) || !std::isfinite(h) || h > spec_.horizon)
            throw InputError("ode: time step must lie in (0, T]");
    }
    double qoi(std::span<const double> y, double h) const override {
        if (y.size() != 1) throw InputError("ode: parameter must be scalar");
        return ode_qoi(y[0], h, spec_);
    }
    double qoi_exact(std::span<const double> y) const override {
        if (y.size() != 1) throw InputError("ode: parameter must be scalar");
        return ode_qoi_exact(y[0], spec_);
    }
    std::vector<double> step_ladder() const override { return {0.1, 0.05, 0.025, 0.0125, 0.01}; }
    double reference_mean() const override {
        std::call_once(once_, [this] { reference_ = ode_reference_mean(spec_); });
        return reference_;
    }

private:
    OdeSpec spec_;
    mutable std::once_flag once_;
    mutable double reference_ = 0.0;
};

class WaveModel final : public ForwardModel {
public:
    ModelId id() const override { return ModelId::Wave16; }
    Box parameter_domain() const override { return spec_.parameter_domain; }
    double cost_exponent() const override { return 3.0; }

    void check_step(double h) const override { wave_cells_for(h, spec_); }
    double qoi(std::span<const double> y, double h) const override {
        if (y.size() != 2) throw InputError("wave: parameter must have 2 components");
        return wave_qoi({y[0], y[1]}, h, spec_);
    }
    double qoi_exact(std::span<const double> y) const override {
        if (y.size() != 2) throw InputError("wave: parameter must have 2 components");
        return wave_qoi_exact({y[0], y[1]}, spec_);
    }
    std::vector<double> step_ladder() const override {
        return {1.0 / 20, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 320};
    }
    double reference_mean() const override {
        std::call_once(once_, [this] { reference_ = wave_reference_mean(spec_); });
        return reference_;
    }

private:
    WaveSpec spec_;
    mutable std::once_flag once_;
    mutable double reference_ = 0.0;
};

}  // namespace

const ForwardModel& model_catalog(ModelId id) {
    static const OdeModel ode;
    static const WaveModel wave;
    switch (id) {
        case ModelId::Ode15: return ode;
        case ModelId::Wave16: return wave;
    }
    throw InputError("unknown model id");
}

}  // namespace mfnn::models
