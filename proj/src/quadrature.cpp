#include "mfnn/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "mfnn/errors.hpp"

namespace mfnn {

QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0) throw InputError("gauss_legendre: n must be >= 1");
    QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
    const double nd = static_cast<double>(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double kd = static_cast<double>(k);
                const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = nd * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            // Recompute the derivative at the converged node.
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double kd = static_cast<double>(k);
                const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = nd * (x * p1 - p0) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

QuadratureRule composite_gauss_legendre(double a, double b, std::size_t panels, std::size_t n) {
    if (panels == 0) throw InputError("composite_gauss_legendre: panels must be >= 1");
    if (!(b > a)) throw InputError("composite_gauss_legendre: empty interval");
    const QuadratureRule base = gauss_legendre(n);
    QuadratureRule rule;
    rule.nodes.reserve(panels * n);
    rule.weights.reserve(panels * n);
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + width * static_cast<double>(p);
        const double mid = lo + 0.5 * width;
        for (std::size_t k = 0; k < n; ++k) {
            rule.nodes.push_back(mid + 0.5 * width * base.nodes[k]);
            rule.weights.push_back(0.5 * width * base.weights[k]);
        }
    }
    return rule;
}

}  // namespace mfnn
