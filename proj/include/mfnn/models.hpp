#pragma once

// Parametric forward models with closed-form manufactured solutions.
//
//   Ode15:  u_t + 0.5 u = f on [0, 100], y ~ U[-1, 1], Q(y) = |u(100, y)|,
//           explicit midpoint RK2.
//   Wave16: u_tt - Laplace(u) = f on [-1, 1]^2 x [0, 30], y ~ U([10,11] x [4,6]),
//           Q(y) = |u(30, (0.5, 0.5), y)|, leapfrog with a 5-point Laplacian.

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfnn/box.hpp"

namespace mfnn::models {

enum class ModelId { Ode15, Wave16 };

std::string to_string(ModelId id);
ModelId model_id_from_string(const std::string& name);

/// Coarse/fine step pair of one model (h_hf < h_lf).
struct BiFidelitySpec {
    double h_lf = 0.0;
    double h_hf = 0.0;
    double order_q = 2.0;
    ModelId model_id = ModelId::Ode15;

    void validate() const;
};

struct OdeSpec {
    double decay = 0.5;
    double horizon = 100.0;
    double y_lower = -1.0;
    double y_upper = 1.0;

    void validate() const;
};

struct WaveSpec {
    double x_lower = -1.0;
    double x_upper = 1.0;
    double horizon = 30.0;
    std::array<double, 2> probe{0.5, 0.5};
    Box parameter_domain{{10.0, 4.0}, {11.0, 6.0}};
    double dt_over_h = 0.5;

    void validate() const;
};

// ---- ODE -------------------------------------------------------------------

double ode_exact(double t, double y);
double ode_exact_dt(double t, double y);
/// f = u_t + decay * u for the manufactured solution.
double ode_forcing(double t, double y, double decay = 0.5);

/// u(T) by explicit midpoint RK2 with n = round(T / h) equal steps of T / n.
double ode_solve_rk2(double y, double h, const OdeSpec& spec = {});
double ode_qoi(double y, double h, const OdeSpec& spec = {});
double ode_qoi_exact(double y, const OdeSpec& spec = {});

// ---- Wave ------------------------------------------------------------------

using Vec2 = std::array<double, 2>;

double wave_exact(double t, Vec2 x, Vec2 y);
double wave_exact_dt(double t, Vec2 x, Vec2 y);
/// f = u_tt - Laplace(u) = (2 y2^2 - y1^2) u.
double wave_forcing(double t, Vec2 x, Vec2 y);

/// Solution on the (n+1) x (n+1) grid at the final time; value(i, j) sits at
/// (x_lower + i h, x_lower + j h).
struct WaveField {
    std::size_t points_per_side = 0;
    double h = 0.0;
    double x_lower = -1.0;
    double x_upper = 1.0;
    double time = 0.0;
    std::vector<double> values;

    double value(std::size_t i, std::size_t j) const { return values[i * points_per_side + j]; }
    double coordinate(std::size_t i) const;
};

/// Grid cells per side for step h; throws InputError if the grid, probe or
/// time steps do not align.
std::size_t wave_cells_for(double h, const WaveSpec& spec = {});

WaveField wave_solve_field(Vec2 y, double h, const WaveSpec& spec = {});
/// u(T, x_Q) from the finite-difference solve.
double wave_solve_fd(Vec2 y, double h, const WaveSpec& spec = {});
double wave_qoi(Vec2 y, double h, const WaveSpec& spec = {});
double wave_qoi_exact(Vec2 y, const WaveSpec& spec = {});

// ---- Reference statistics ----------------------------------------------------

/// E[Q] under U[-1, 1]: composite Gauss-Legendre, 2000 panels x 50 nodes.
double ode_reference_mean(const OdeSpec& spec = {});
/// E[Q] under U(Gamma): composite tensor Gauss-Legendre.
double wave_reference_mean(const WaveSpec& spec = {});

// ---- Catalog ---------------------------------------------------------------

class ForwardModel {
public:
    virtual ~ForwardModel() = default;

    virtual ModelId id() const = 0;
    virtual Box parameter_domain() const = 0;
    std::size_t dim() const { return parameter_domain().dim(); }

    /// Convergence order q of the discretization.
    virtual double order() const { return 2.0; }
    /// Exponent gamma in W_HF ~ h^{-gamma}.
    virtual double cost_exponent() const = 0;

    /// Throws InputError if h is not admissible for this solver.
    virtual void check_step(double h) const = 0;
    virtual double qoi(std::span<const double> y, double h) const = 0;
    virtual double qoi_exact(std::span<const double> y) const = 0;

    /// Admissible high-fidelity steps, coarsest first.
    virtual std::vector<double> step_ladder() const = 0;
    virtual double reference_mean() const = 0;
};

const ForwardModel& model_catalog(ModelId id);

}  // namespace mfnn::models
