#include "mfnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfnn/design.hpp"
#include "mfnn/errors.hpp"

namespace mfnn::analysis {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inv_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("inv_normal_cdf: p must lie in (0, 1)");
    // Acklam's rational approximation, then one Halley step on erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

std::string to_string(ErrorMode m) { return m == ErrorMode::Relative ? "relative" : "absolute"; }

ErrorMode error_mode_from_string(const std::string& name) {
    if (name == "relative") return ErrorMode::Relative;
    if (name == "absolute") return ErrorMode::Absolute;
    throw InputError("unknown error mode '" + name + "'");
}

ToleranceBudget ToleranceBudget::make(double tol, ErrorMode mode, double theta, double alpha) {
    ToleranceBudget b{tol, theta, alpha, 0.0, mode};
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("budget: alpha must lie in (0, 1)");
    b.c_alpha = inv_normal_cdf(1.0 - alpha / 2.0);
    b.validate();
    return b;
}

void ToleranceBudget::validate() const {
    if (!(tol > 0.0) || !std::isfinite(tol)) throw InputError("budget: tolerance must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw InputError("budget: theta must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("budget: alpha must lie in (0, 1)");
    if (!(c_alpha > 0.0)) throw InputError("budget: c_alpha must be positive");
}

double ToleranceBudget::absolute_tolerance(double reference) const {
    return error_mode == ErrorMode::Relative ? tol * std::abs(reference) : tol;
}

double select_h_hf(const ToleranceBudget& budget, double order_q, double bias_constant,
                   std::span<const double> ladder, double reference) {
    budget.validate();
    if (!(bias_constant > 0.0)) throw InputError("select_h_hf: bias constant must be positive");
    if (!(order_q > 0.0)) throw InputError("select_h_hf: order must be positive");
    if (ladder.empty()) throw ConfigError("select_h_hf: empty step ladder");
    const double bound = (1.0 - budget.theta) * budget.absolute_tolerance(reference);
    double best = 0.0;
    for (double h : ladder) {
        if (bias_constant * std::pow(h, order_q) <= bound * (1.0 + 1e-12)) best = std::max(best, h);
    }
    if (best == 0.0) {
        const double need = std::pow(bound / bias_constant, 1.0 / order_q);
        throw ConfigError("select_h_hf: no ladder step satisfies the bias bound; need h <= " +
                          std::to_string(need) + ", extend the ladder");
    }
    return best;
}

std::size_t select_n_samples(const ToleranceBudget& budget, double variance_estimate,
                             double reference) {
    budget.validate();
    if (!(variance_estimate >= 0.0) || !std::isfinite(variance_estimate))
        throw InputError("select_n_samples: variance must be finite and >= 0");
    const double tol_abs = budget.absolute_tolerance(reference);
    if (!(tol_abs > 0.0)) throw InputError("select_n_samples: zero absolute tolerance");
    const double stat = budget.theta * tol_abs;
    const double n = std::ceil(budget.c_alpha * budget.c_alpha * variance_estimate / (stat * stat));
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

BiasFit fit_bias_constant(const models::ForwardModel& model, std::span<const double> steps,
                          std::size_t draws, std::uint64_t seed) {
    if (steps.empty() || draws == 0) throw InputError("fit_bias_constant: need steps and draws");
    const design::PointSet ys = design::draw_mc_samples(draws, model.parameter_domain(), seed);
    BiasFit fit;
    double log_sum = 0.0;
    for (double h : steps) {
        double worst = 0.0;
        for (std::size_t k = 0; k < ys.size(); ++k)
            worst = std::max(worst, std::abs(model.qoi(ys.point(k), h) - model.qoi_exact(ys.point(k))));
        fit.steps.push_back(h);
        fit.max_errors.push_back(worst);
        log_sum += std::log(worst / std::pow(h, model.order()));
    }
    fit.constant = std::exp(log_sum / static_cast<double>(steps.size()));
    return fit;
}

double anchor_bias_constant(const ToleranceBudget& budget, double order_q, double h,
                            double reference) {
    budget.validate();
    if (!(h > 0.0)) throw InputError("anchor_bias_constant: h must be positive");
    return (1.0 - budget.theta) * budget.absolute_tolerance(reference) / std::pow(h, order_q);
}

double fit_cost_slope(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw InputError("fit_cost_slope: need at least two points");
    double sx = 0.0, sy = 0.0;
    for (const auto& [tol, cost] : points) {
        if (!(tol > 0.0) || !(cost > 0.0)) throw InputError("fit_cost_slope: values must be positive");
        sx += -std::log(tol);
        sy += std::log(cost);
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [tol, cost] : points) {
        const double dx = -std::log(tol) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(cost) - my);
    }
    if (!(sxx > 1e-24)) throw InputError("fit_cost_slope: tolerances are not distinct");
    return sxy / sxx;
}

std::size_t required_compliant(std::size_t runs, double alpha, double significance) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("required_compliant: alpha in (0, 1)");
    // tail[f] = P(F >= f), F ~ Binomial(runs, alpha)
    std::vector<double> pmf(runs + 1);
    for (std::size_t f = 0; f <= runs; ++f) {
        const double lc = std::lgamma(runs + 1.0) - std::lgamma(f + 1.0) - std::lgamma(runs - f + 1.0);
        pmf[f] = std::exp(lc + f * std::log(alpha) + (runs - f) * std::log1p(-alpha));
    }
    double tail = 1.0;
    std::size_t allowed = 0;
    for (std::size_t f = 1; f <= runs; ++f) {
        tail -= pmf[f - 1];
        if (tail >= significance) allowed = f;
        else break;
    }
    return runs - allowed;
}

bool within_tolerance(const pipeline::EstimatorResult& r, const ToleranceBudget& budget) {
    if (!r.reference) throw InputError("compliance: result has no reference value");
    const double err = budget.error_mode == ErrorMode::Relative ? *r.error_rel : *r.error_abs;
    return err <= budget.tol;
}

ComplianceReport check_tolerance_compliance(std::span<const pipeline::EstimatorResult> results,
                                            const ToleranceBudget& budget, double significance) {
    budget.validate();
    ComplianceReport rep;
    rep.runs = results.size();
    for (const auto& r : results)
        if (within_tolerance(r, budget)) ++rep.compliant;
    if (rep.runs == 0) return rep;
    rep.fraction = static_cast<double>(rep.compliant) / static_cast<double>(rep.runs);
    rep.required = required_compliant(rep.runs, budget.alpha, significance);
    rep.pass = rep.compliant >= rep.required;
    return rep;
}

double CostLedger::six_term_sum() const {
    return lf_solves + hf_solves + train_nn1 + predict_nn1 + train_nn2 + predict_nn2;
}

CostLedger build_ledger(const SampleCounts& counts, const PhaseTimes& t) {
    for (double v : {t.w_lf, t.w_hf, t.w_t1, t.w_p1, t.w_t2, t.w_p2})
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("build_ledger: negative or non-finite time");
    CostLedger l;
    l.counts = counts;
    l.unit = t;
    l.lf_solves = static_cast<double>(counts.m) * t.w_lf;
    l.hf_solves = static_cast<double>(counts.m1) * t.w_hf;
    l.train_nn1 = t.w_t1;
    l.predict_nn1 = static_cast<double>(counts.m2) * t.w_p1;
    l.train_nn2 = t.w_t2;
    l.predict_nn2 = static_cast<double>(counts.n) * t.w_p2;
    l.total_mfnnmc = l.six_term_sum();
    l.total_hfmc = static_cast<double>(counts.n) * t.w_hf;
    return l;
}

}  // namespace mfnn::analysis

namespace mfnn::pipeline {

std::string to_string(Method m) { return m == Method::MFNNMC ? "MFNNMC" : "HFMC"; }

Method method_from_string(const std::string& name) {
    if (name == "MFNNMC" || name == "mfnnmc") return Method::MFNNMC;
    if (name == "HFMC" || name == "hfmc") return Method::HFMC;
    throw InputError("unknown method '" + name + "'");
}

void EstimatorResult::set_reference(double ref) {
    reference = ref;
    error_abs = std::abs(estimate - ref);
    error_rel = *error_abs / std::abs(ref);
}

}  // namespace mfnn::pipeline
