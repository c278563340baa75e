#pragma once

// Tolerance budgeting, step and sample-size selection, bias calibration,
// cost-slope fits and compliance checks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfnn/ledger.hpp"
#include "mfnn/models.hpp"
#include "mfnn/result.hpp"

namespace mfnn::analysis {

double normal_cdf(double x);
/// Quantile of the standard normal, |error| <= 1e-9 on (0, 1).
double inv_normal_cdf(double p);

enum class ErrorMode { Relative, Absolute };

std::string to_string(ErrorMode m);
ErrorMode error_mode_from_string(const std::string& name);

struct ToleranceBudget {
    double tol = 1e-2;
    double theta = 0.5;
    double alpha = 0.01;
    double c_alpha = 0.0;
    ErrorMode error_mode = ErrorMode::Relative;

    /// Budget with c_alpha = inv_normal_cdf(1 - alpha / 2).
    static ToleranceBudget make(double tol, ErrorMode mode, double theta = 0.5, double alpha = 0.01);

    void validate() const;
    /// tol * |reference| in Relative mode, tol in Absolute mode.
    double absolute_tolerance(double reference) const;
};

/// Largest h from `ladder` with C h^q <= (1 - theta) tol_abs (inclusive up to
/// a 1e-12 relative slack). Throws ConfigError when no entry qualifies.
double select_h_hf(const ToleranceBudget& budget, double order_q, double bias_constant,
                   std::span<const double> ladder, double reference = 1.0);

/// N = ceil(c_alpha^2 V / (theta tol_abs)^2), at least 1.
std::size_t select_n_samples(const ToleranceBudget& budget, double variance_estimate,
                             double reference = 1.0);

struct BiasFit {
    std::vector<double> steps;
    std::vector<double> max_errors;
    /// C with max error ~= C h^q, geometric mean of max_error / h^q.
    double constant = 0.0;
};

/// Max |Q_h - Q| over `draws` uniform parameter draws at each h.
BiasFit fit_bias_constant(const models::ForwardModel& model, std::span<const double> steps,
                          std::size_t draws, std::uint64_t seed);

/// C that makes (tol, h) sit exactly on the bias bound.
double anchor_bias_constant(const ToleranceBudget& budget, double order_q, double h,
                            double reference = 1.0);

/// Least-squares slope of log(cost) against log(1/tol).
double fit_cost_slope(std::span<const std::pair<double, double>> points);

struct ComplianceReport {
    std::size_t runs = 0;
    std::size_t compliant = 0;
    std::size_t required = 0;
    double fraction = 0.0;
    bool pass = false;
};

/// Smallest compliant count accepted out of `runs`: the largest failure
/// count f still has P(F >= f) >= significance under Binomial(runs, alpha).
std::size_t required_compliant(std::size_t runs, double alpha, double significance = 0.05);

/// Throws InputError if a result has no reference.
ComplianceReport check_tolerance_compliance(std::span<const pipeline::EstimatorResult> results,
                                            const ToleranceBudget& budget,
                                            double significance = 0.05);

bool within_tolerance(const pipeline::EstimatorResult& r, const ToleranceBudget& budget);

}  // namespace mfnn::analysis
