#include "mfnn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mfnn/errors.hpp"
#include "mfnn/rng.hpp"

namespace mfnn::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string point_string(std::span<const double> y) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (std::size_t i = 0; i < y.size(); ++i) os << (i ? ", " : "") << y[i];
    os << ')';
    return os.str();
}

double power(double q, int k) {
    if (k == 1) return q;
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= q;
    return r;
}

template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

nnet::Architecture make_arch(std::size_t input_width, const NetworkSpec& spec) {
    nnet::Architecture a;
    a.input_width = input_width;
    a.hidden_widths = spec.hidden_widths;
    a.output_width = 1;
    a.hidden_activation = spec.activation;
    a.output_activation = nnet::Activation::Identity;
    return a;
}

nnet::Matrix column(std::span<const double> v) {
    nnet::Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
    return m;
}

}  // namespace

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = count * t / threads;
        const std::size_t hi = count * (t + 1) / threads;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!first) first = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first) std::rethrow_exception(first);
}

void Moments::add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
}

Moments Moments::merge(const Moments& a, const Moments& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    Moments r;
    r.count = a.count + b.count;
    const double na = static_cast<double>(a.count), nb = static_cast<double>(b.count);
    const double n = static_cast<double>(r.count);
    const double delta = b.mean - a.mean;
    r.mean = a.mean + delta * (nb / n);
    r.m2 = a.m2 + b.m2 + delta * delta * (na * nb / n);
    return r;
}

double Moments::variance() const {
    return count < 2 ? 0.0 : std::max(0.0, m2 / static_cast<double>(count - 1));
}

Moments tree_merge(std::span<const Moments> blocks) {
    if (blocks.empty()) return {};
    if (blocks.size() == 1) return blocks[0];
    const std::size_t half = blocks.size() / 2;
    return Moments::merge(tree_merge(blocks.first(half)), tree_merge(blocks.subspan(half)));
}

// ---- fidelity data -----------------------------------------------------------

FidelityData evaluate_fidelity_data(const design::SampleDesign& design,
                                    const models::BiFidelitySpec& spec, std::size_t threads) {
    // equal steps are allowed here (degenerate but well defined); campaigns
    // enforce h_hf < h_lf through BiFidelitySpec::validate
    if (!(spec.h_hf > 0.0) || !(spec.h_lf > 0.0) || spec.h_hf > spec.h_lf)
        throw InputError("fidelity data: need 0 < h_hf <= h_lf");
    const auto& model = models::model_catalog(spec.model_id);
    if (design.domain.dim() != model.dim())
        throw InputError("fidelity data: design dimension does not match the model");
    const design::PointSet all = design.all_points();

    auto solve = [&](std::span<const double> y, double h) {
        try {
            return model.qoi(y, h);
        } catch (const std::exception& e) {
            throw InputError(std::string(e.what()) + " at y = " + point_string(y));
        }
    };

    FidelityData out;
    out.lf_all.resize(all.size());
    out.hf_on_I.resize(design.m1());
    auto t0 = Clock::now();
    parallel_for(all.size(), threads, [&](std::size_t i) { out.lf_all[i] = solve(all.point(i), spec.h_lf); });
    out.lf_seconds = seconds_since(t0);
    t0 = Clock::now();
    parallel_for(design.m1(), threads,
                 [&](std::size_t i) { out.hf_on_I[i] = solve(design.y_I.point(i), spec.h_hf); });
    out.hf_seconds = seconds_since(t0);
    return out;
}

// ---- networks -------------------------------------------------------------------

nnet::Matrix nn2_inputs(const design::PointSet& ys, const design::ScalingTransform& scaling) {
    const auto dim = ys.dim;
    if (dim != scaling.dim()) throw InputError("nn2 inputs: dimension mismatch");
    nnet::Matrix x(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < ys.size(); ++i) {
        std::span<double> row(x.data() + i * dim, dim);
        std::copy_n(ys.point(i).begin(), dim, row.begin());
        scaling.apply_in_place(row);
    }
    return x;
}

nnet::Matrix nn1_inputs(const design::PointSet& ys, std::span<const double> q_lf,
                        const InputScaling& scaling) {
    if (q_lf.size() != ys.size()) throw InputError("nn1 inputs: one Q_LF value per point required");
    const auto dim = ys.dim;
    nnet::Matrix x(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(dim + 1));
    for (std::size_t i = 0; i < ys.size(); ++i) {
        std::span<double> row(x.data() + i * (dim + 1), dim);
        std::copy_n(ys.point(i).begin(), dim, row.begin());
        scaling.y.apply_in_place(row);
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(dim)) = scaling.q_lf.apply(q_lf[i]);
    }
    return x;
}

nnet::TrainResult train_nn1(const design::SampleDesign& design, std::span<const double> lf_all,
                            std::span<const double> hf_on_I, const InputScaling& scaling,
                            const nnet::Architecture& arch, const nnet::TrainingConfig& cfg,
                            std::uint64_t seed) {
    if (hf_on_I.size() != design.m1() || lf_all.size() != design.m())
        throw InputError("train_nn1: data sizes do not match the design");
    if (arch.input_width != design.domain.dim() + 1)
        throw InputError("train_nn1: NN1 takes dim(y) + 1 inputs");
    nnet::Dataset data{nn1_inputs(design.y_I, lf_all.first(design.m1()), scaling), column(hf_on_I)};
    return nnet::train(arch, data, cfg, seed);
}

AugmentedDataset augment_hf(const std::function<double(std::span<const double>, double)>& correlation,
                            const design::SampleDesign& design, std::span<const double> lf_all,
                            std::span<const double> hf_on_I) {
    if (hf_on_I.size() != design.m1() || lf_all.size() != design.m())
        throw InputError("augment_hf: data sizes do not match the design");
    AugmentedDataset aug;
    aug.points = design.all_points();
    aug.values.assign(hf_on_I.begin(), hf_on_I.end());
    aug.provenance.assign(design.m1(), Provenance::Solver);
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < design.m2(); ++i) {
        aug.values.push_back(correlation(design.y_II.point(i), lf_all[design.m1() + i]));
        aug.provenance.push_back(Provenance::Nn1);
    }
    aug.predict_seconds = seconds_since(t0);
    return aug;
}

AugmentedDataset augment_hf(const nnet::NetworkParams& nn1, const design::SampleDesign& design,
                            std::span<const double> lf_all, std::span<const double> hf_on_I,
                            const InputScaling& scaling) {
    if (hf_on_I.size() != design.m1() || lf_all.size() != design.m())
        throw InputError("augment_hf: data sizes do not match the design");
    AugmentedDataset aug;
    aug.points = design.all_points();
    aug.values.assign(hf_on_I.begin(), hf_on_I.end());
    aug.provenance.assign(design.m1(), Provenance::Solver);
    if (design.m2() == 0) return aug;
    const auto t0 = Clock::now();
    const nnet::Matrix x = nn1_inputs(design.y_II, lf_all.subspan(design.m1()), scaling);
    const nnet::Matrix pred = nnet::forward_batch(nn1, x);
    aug.predict_seconds = seconds_since(t0);
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        aug.values.push_back(pred(i, 0));
        aug.provenance.push_back(Provenance::Nn1);
    }
    return aug;
}

nnet::TrainResult train_nn2(const AugmentedDataset& data, const design::ScalingTransform& scaling,
                            const nnet::Architecture& arch, const nnet::TrainingConfig& cfg,
                            std::uint64_t seed) {
    if (arch.input_width != data.points.dim) throw InputError("train_nn2: NN2 takes dim(y) inputs");
    if (data.size() != data.points.size()) throw InputError("train_nn2: ragged dataset");
    nnet::Dataset d{nn2_inputs(data.points, scaling), column(data.values)};
    return nnet::train(arch, d, cfg, seed);
}

// ---- surrogates --------------------------------------------------------------------

NetworkSurrogate::NetworkSurrogate(nnet::NetworkParams nn2, design::ScalingTransform scaling)
    : nn2_(std::move(nn2)), scaling_(std::move(scaling)) {
    if (nn2_.arch.input_width != scaling_.dim() || nn2_.arch.output_width != 1)
        throw InputError("network surrogate: NN2 shape does not match the scaling");
}

void NetworkSurrogate::evaluate(const design::PointSet& ys, std::span<double> out) const {
    if (out.size() != ys.size()) throw InputError("surrogate: output size mismatch");
    const nnet::Matrix pred = nnet::forward_batch(nn2_, nn2_inputs(ys, scaling_));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pred(static_cast<Eigen::Index>(i), 0);
}

FunctionSurrogate::FunctionSurrogate(std::size_t dim, std::function<double(std::span<const double>)> fn)
    : dim_(dim), fn_(std::move(fn)) {}

void FunctionSurrogate::evaluate(const design::PointSet& ys, std::span<double> out) const {
    if (out.size() != ys.size() || ys.dim != dim_) throw InputError("surrogate: shape mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn_(ys.point(i));
}

// ---- estimators -------------------------------------------------------------------------

namespace {

template <typename BlockPoints>
Moments reduce(const Surrogate& s, std::size_t n, const EstimateOptions& opt, BlockPoints&& points) {
    if (opt.moment < 1) throw InputError("estimator: moment order must be >= 1");
    const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
    std::vector<Moments> parts(blocks);
    parallel_for(blocks, opt.threads, [&](std::size_t b) {
        const std::size_t first = b * kReductionBlock;
        const std::size_t count = std::min(kReductionBlock, n - first);
        const design::PointSet ys = points(first, count);
        std::vector<double> q(count);
        s.evaluate(ys, q);
        Moments m;
        for (double v : q) {
            if (!std::isfinite(v)) throw InputError("estimator: non-finite QoI value");
            m.add(power(v, opt.moment));
        }
        parts[b] = m;
    });
    return tree_merge(parts);
}

EstimatorResult to_result(const Moments& m, Method method, int moment) {
    EstimatorResult r;
    r.estimate = m.mean;
    r.sample_variance = m.variance();
    r.n_samples = m.count;
    r.method = method;
    r.moment = moment;
    return r;
}

design::PointSet slice(const design::PointSet& all, std::size_t first, std::size_t count) {
    design::PointSet p(all.dim);
    p.values.assign(all.values.begin() + static_cast<std::ptrdiff_t>(first * all.dim),
                    all.values.begin() + static_cast<std::ptrdiff_t>((first + count) * all.dim));
    return p;
}

}  // namespace

Moments sample_moments(const Surrogate& s, const SampleStream& stream, const EstimateOptions& opt) {
    if (stream.n == 0) throw InputError("estimator: N must be >= 1");
    if (stream.domain.dim() != s.dim()) throw InputError("estimator: domain dimension mismatch");
    return reduce(s, stream.n, opt, [&](std::size_t first, std::size_t count) {
        return design::draw_mc_range(first, count, stream.domain, stream.seed);
    });
}

Moments sample_moments(const Surrogate& s, const design::PointSet& samples, const EstimateOptions& opt) {
    if (samples.size() == 0) throw InputError("estimator: empty sample list");
    if (samples.dim != s.dim()) throw InputError("estimator: sample dimension mismatch");
    return reduce(s, samples.size(), opt,
                  [&](std::size_t first, std::size_t count) { return slice(samples, first, count); });
}

EstimatorResult estimate_mfnnmc(const Surrogate& nn2, const SampleStream& stream,
                                const EstimateOptions& opt) {
    const auto t0 = Clock::now();
    const Moments m = sample_moments(nn2, stream, opt);
    const double elapsed = seconds_since(t0);
    EstimatorResult r = to_result(m, Method::MFNNMC, opt.moment);
    analysis::PhaseTimes t;
    t.w_p2 = elapsed / static_cast<double>(m.count);
    r.cost = analysis::build_ledger({0, 0, 0, m.count}, t);
    return r;
}

EstimatorResult estimate_mfnnmc(const Surrogate& nn2, const design::PointSet& samples,
                                const EstimateOptions& opt) {
    const auto t0 = Clock::now();
    const Moments m = sample_moments(nn2, samples, opt);
    const double elapsed = seconds_since(t0);
    EstimatorResult r = to_result(m, Method::MFNNMC, opt.moment);
    analysis::PhaseTimes t;
    t.w_p2 = elapsed / static_cast<double>(m.count);
    r.cost = analysis::build_ledger({0, 0, 0, m.count}, t);
    return r;
}

EstimatorResult estimate_hfmc(const Surrogate& solver, const design::PointSet& samples,
                              const EstimateOptions& opt) {
    const auto t0 = Clock::now();
    const Moments m = sample_moments(solver, samples, opt);
    const double elapsed = seconds_since(t0);
    EstimatorResult r = to_result(m, Method::HFMC, opt.moment);
    analysis::PhaseTimes t;
    t.w_hf = elapsed / static_cast<double>(m.count);
    r.cost = analysis::build_ledger({0, 0, 0, m.count}, t);
    return r;
}

EstimatorResult estimate_hfmc(const models::ForwardModel& model, double h_hf,
                              const SampleStream& stream, const EstimateOptions& opt) {
    model.check_step(h_hf);
    FunctionSurrogate solver(model.dim(), [&](std::span<const double> y) { return model.qoi(y, h_hf); });
    const auto t0 = Clock::now();
    const Moments m = sample_moments(solver, stream, opt);
    const double elapsed = seconds_since(t0);
    EstimatorResult r = to_result(m, Method::HFMC, opt.moment);
    analysis::PhaseTimes t;
    t.w_hf = elapsed / static_cast<double>(m.count);
    r.cost = analysis::build_ledger({0, 0, 0, m.count}, t);
    return r;
}

double measure_solve_cost(const models::ForwardModel& model, double h, std::size_t solves,
                          std::uint64_t seed) {
    if (solves == 0) throw InputError("measure_solve_cost: need at least one solve");
    model.check_step(h);
    const design::PointSet ys = design::draw_mc_samples(solves, model.parameter_domain(), seed);
    volatile double sink = 0.0;
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < ys.size(); ++i) sink = sink + model.qoi(ys.point(i), h);
    return seconds_since(t0) / static_cast<double>(solves);
}

// ---- campaign ---------------------------------------------------------------------------

design::SampleDesign build_design(const models::ForwardModel& model, const DesignSpec& spec) {
    const Box domain = model.parameter_domain();
    if (domain.dim() == 1) return design::build_design_1d(spec.m, domain, spec.stride);
    if (domain.dim() == 2) return design::build_design_2d(spec.n1, spec.n2, domain);
    throw ConfigError("build_design: only 1-D and 2-D parameter domains are supported");
}

CampaignOutcome run_mfnnmc(const RunSpec& spec, const RunOptions& options) {
    const auto& model = models::model_catalog(spec.fidelity.model_id);
    CampaignOutcome out;
    const std::uint64_t master = spec.master_seed, rep = spec.repetition;

    // 1
    out.design = staged("design", [&] {
        spec.fidelity.validate();
        spec.budget.validate();
        return build_design(model, spec.design);
    });

    // 2-3
    out.fidelity = staged("fidelity", [&] {
        if (options.cached_fidelity) {
            const FidelityData& c = *options.cached_fidelity;
            if (c.lf_all.size() != out.design.m() || c.hf_on_I.size() != out.design.m1())
                throw InputError("cached fidelity data does not match the design");
            return c;
        }
        return evaluate_fidelity_data(out.design, spec.fidelity, options.threads);
    });

    auto& bundle = out.bundle;
    bundle.scaling.y = design::ScalingTransform{model.parameter_domain(), spec.scaling_lower,
                                                spec.scaling_upper};
    bundle.scaling.y.validate();
    bundle.scaling.q_lf = design::MinMaxScaler::fit(
        std::span<const double>(out.fidelity.lf_all).first(out.design.m1()));

    auto with_init_box = [&](nnet::TrainingConfig cfg, SeedPhase shuffle_phase) {
        cfg.shuffle_seed = derive_seed(master, shuffle_phase, rep);
        cfg.init.input_lower = spec.scaling_lower;
        cfg.init.input_upper = spec.scaling_upper;
        return cfg;
    };

    // 4
    double w_t1 = 0.0;
    if (out.design.m2() > 0) {
        staged("nn1", [&] {
            const auto arch = make_arch(model.dim() + 1, spec.nn1);
            const auto cfg = with_init_box(spec.nn1.training, SeedPhase::Nn1Shuffle);
            const auto t0 = Clock::now();
            auto tr = train_nn1(out.design, out.fidelity.lf_all, out.fidelity.hf_on_I, bundle.scaling,
                                arch, cfg, derive_seed(master, SeedPhase::Nn1Init, rep));
            w_t1 = seconds_since(t0);
            bundle.nn1 = std::move(tr.params);
            bundle.nn1_history = std::move(tr.history);
            bundle.has_nn1 = true;
            return 0;
        });
    }

    // 5
    out.augmented = staged("augment", [&] {
        if (!bundle.has_nn1)
            return augment_hf([](std::span<const double>, double) -> double {
                throw InputError("no NN1 for an empty Y_II");
            }, out.design, out.fidelity.lf_all, out.fidelity.hf_on_I);
        return augment_hf(bundle.nn1, out.design, out.fidelity.lf_all, out.fidelity.hf_on_I,
                          bundle.scaling);
    });

    // 6
    double w_t2 = 0.0;
    staged("nn2", [&] {
        const auto arch = make_arch(model.dim(), spec.nn2);
        const auto cfg = with_init_box(spec.nn2.training, SeedPhase::Nn2Shuffle);
        const auto t0 = Clock::now();
        auto tr = train_nn2(out.augmented, bundle.scaling.y, arch, cfg,
                            derive_seed(master, SeedPhase::Nn2Init, rep));
        w_t2 = seconds_since(t0);
        bundle.nn2 = std::move(tr.params);
        bundle.nn2_history = std::move(tr.history);
        return 0;
    });

    const NetworkSurrogate surrogate(bundle.nn2, bundle.scaling.y);
    const EstimateOptions est{spec.moment, options.threads};

    // 7: sample count
    const std::size_t n = staged("pilot", [&]() -> std::size_t {
        if (spec.n_samples > 0) return spec.n_samples;
        if (spec.pilot_samples < 2) throw ConfigError("pilot needs at least 2 samples");
        const Moments m = sample_moments(
            surrogate,
            SampleStream{model.parameter_domain(), spec.pilot_samples, derive_seed(master, SeedPhase::Pilot, rep)},
            est);
        out.pilot_n = m.count;
        out.pilot_mean = m.mean;
        out.pilot_variance = m.variance();
        return analysis::select_n_samples(spec.budget, out.pilot_variance, out.pilot_mean);
    });

    // 8
    out.result = staged("estimate", [&] {
        EstimatorResult r = estimate_mfnnmc(
            surrogate, SampleStream{model.parameter_domain(), n, derive_seed(master, SeedPhase::McDraws, rep)},
            est);
        analysis::PhaseTimes t;
        t.w_lf = out.fidelity.lf_seconds / static_cast<double>(out.design.m());
        t.w_hf = out.fidelity.hf_seconds / static_cast<double>(out.design.m1());
        t.w_t1 = w_t1;
        t.w_p1 = out.design.m2() ? out.augmented.predict_seconds / static_cast<double>(out.design.m2()) : 0.0;
        t.w_t2 = w_t2;
        t.w_p2 = r.cost.unit.w_p2;
        r.cost = analysis::build_ledger({out.design.m(), out.design.m1(), out.design.m2(), n}, t);
        if (spec.reference) r.set_reference(*spec.reference);
        else if (spec.moment == 1) r.set_reference(model.reference_mean());
        return r;
    });

    if (options.artifacts_dir) {
        staged("artifacts", [&] {
            const auto& dir = *options.artifacts_dir;
            std::filesystem::create_directories(dir);
            design::write_design_csv(out.design, dir / "design.csv");
            write_fidelity_csv(out, dir / "fidelity.csv");
            if (bundle.has_nn1) nnet::save_checkpoint(bundle.nn1, dir / "nn1.ckpt");
            nnet::save_checkpoint(bundle.nn2, dir / "nn2.ckpt");
            std::ofstream f(dir / "result.json");
            if (!f) throw InputError("cannot write " + (dir / "result.json").string());
            f << result_json(out, spec, options) << '\n';
            return 0;
        });
    }
    return out;
}

}  // namespace mfnn::pipeline
