#pragma once

// Property checks shared by the `validate` subcommand: backprop against
// central differences, observed solver orders, manufactured residuals.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mfnn/nnet.hpp"

namespace mfnn::verify {

struct Check {
    std::string name;
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool pass = false;
};

/// Max over `cases` random (params, batch) draws of the component-wise
/// |g_bp - g_fd| / max(|g_bp|, |g_fd|, floor). Draws with a ReLU
/// pre-activation within `kink_margin` of zero are redrawn.
double gradient_discrepancy(const nnet::Architecture& arch, std::size_t cases, std::uint64_t seed,
                            double fd_step = 1e-6, double floor = 1e-4, double kink_margin = 1e-5);

/// Mean over draws of log2(e(h_coarse) / e(h_fine)) with e = |u_h(T) - u(T)|.
double ode_observed_order(double h_coarse, double h_fine, std::size_t draws, std::uint64_t seed);

/// Same statistic for the wave solver with e the grid L2 error of the field at T.
double wave_observed_order(double h_coarse, double h_fine, std::size_t draws, std::uint64_t seed);

/// Max |u_t + 0.5 u - f| with u_t by central differences (step 1e-6).
double ode_residual_max(std::size_t points, std::uint64_t seed);
/// Max |u_tt - Laplace(u) - f| / (1 + y1^2 + 2 y2^2) with second differences (step 1e-4).
double wave_residual_max(std::size_t points, std::uint64_t seed);

/// The full suite with the thresholds used by `validate`.
std::vector<Check> run_property_suite(std::uint64_t seed, bool quick = false);

}  // namespace mfnn::verify
