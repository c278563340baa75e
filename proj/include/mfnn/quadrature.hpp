#pragma once

#include <cstddef>
#include <vector>

namespace mfnn {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
QuadratureRule gauss_legendre(std::size_t n);

/// Composite rule on [a, b]: `panels` equal panels with an n-point rule each.
QuadratureRule composite_gauss_legendre(double a, double b, std::size_t panels, std::size_t n);

}  // namespace mfnn
