#include "mfnn/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mfnn/errors.hpp"
#include "mfnn/rng.hpp"

namespace mfnn::design {

namespace {

double grid_coordinate(double lo, double hi, std::size_t i, std::size_t n) {
    if (i == 0) return lo;
    if (i + 1 == n) return hi;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void PointSet::push_back(std::span<const double> p) {
    if (p.size() != dim) throw InputError("point set: dimension mismatch");
    values.insert(values.end(), p.begin(), p.end());
}

PointSet SampleDesign::all_points() const {
    PointSet all(domain.dim());
    all.values = y_I.values;
    all.values.insert(all.values.end(), y_II.values.begin(), y_II.values.end());
    return all;
}

SampleDesign build_design_1d(std::size_t m, const Box& domain, std::size_t stride) {
    domain.validate();
    if (domain.dim() != 1) throw ConfigError("design_1d: domain must be one-dimensional");
    if (m < 5) throw ConfigError("design_1d: need M >= 5 points, got " + std::to_string(m));
    if (stride == 0) throw ConfigError("design_1d: stride must be >= 1");
    SampleDesign d{domain, PointSet(1), PointSet(1), {}, {}};
    for (std::size_t i = 0; i < m; ++i) {
        const double y = grid_coordinate(domain.lower[0], domain.upper[0], i, m);
        if (i % stride == 0) {
            d.y_I.push_back(std::span(&y, 1));
            d.grid_index_I.push_back(i);
        } else {
            d.y_II.push_back(std::span(&y, 1));
            d.grid_index_II.push_back(i);
        }
    }
    return d;
}

SampleDesign build_design_2d(std::size_t n1, std::size_t n2, const Box& domain) {
    domain.validate();
    if (domain.dim() != 2) throw ConfigError("design_2d: domain must be two-dimensional");
    if (n1 < 3 || n2 < 3)
        throw ConfigError("design_2d: need at least 3 points per dimension, got " +
                          std::to_string(n1) + " x " + std::to_string(n2));
    SampleDesign d{domain, PointSet(2), PointSet(2), {}, {}};
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            const double p[2] = {grid_coordinate(domain.lower[0], domain.upper[0], i, n1),
                                 grid_coordinate(domain.lower[1], domain.upper[1], j, n2)};
            const std::size_t k = i * n2 + j;
            if (i % 2 == 0 && j % 2 == 0) {
                d.y_I.push_back(p);
                d.grid_index_I.push_back(k);
            } else {
                d.y_II.push_back(p);
                d.grid_index_II.push_back(k);
            }
        }
    }
    return d;
}

PointSet draw_mc_range(std::size_t first, std::size_t count, const Box& domain, std::uint64_t seed) {
    domain.validate();
    const std::size_t dim = domain.dim();
    PointSet out(dim);
    out.values.resize(count * dim);
    for (std::size_t k = 0; k < count; ++k) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double u = SplitMix64::to_unit(SplitMix64::at(seed, (first + k) * dim + j));
            out.values[k * dim + j] = domain.lower[j] + (domain.upper[j] - domain.lower[j]) * u;
        }
    }
    return out;
}

PointSet draw_mc_samples(std::size_t n, const Box& domain, std::uint64_t seed) {
    if (n == 0) throw InputError("draw_mc_samples: N must be >= 1");
    return draw_mc_range(0, n, domain, seed);
}

void ScalingTransform::validate() const {
    source.validate();
    if (!(target_lower < target_upper)) throw InputError("scaling: target interval is empty");
}

void ScalingTransform::apply_in_place(std::span<double> x) const {
    if (x.size() != dim()) throw InputError("scaling: dimension mismatch");
    const double span = target_upper - target_lower;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double s = (x[d] - source.lower[d]) / (source.upper[d] - source.lower[d]);
        x[d] = target_lower + span * s;
    }
}

std::vector<double> ScalingTransform::apply(std::span<const double> x) const {
    std::vector<double> z(x.begin(), x.end());
    apply_in_place(z);
    return z;
}

std::vector<double> ScalingTransform::inverse(std::span<const double> z) const {
    if (z.size() != dim()) throw InputError("scaling: dimension mismatch");
    std::vector<double> x(z.size());
    for (std::size_t d = 0; d < z.size(); ++d) {
        const double s = (z[d] - target_lower) / (target_upper - target_lower);
        x[d] = source.lower[d] + (source.upper[d] - source.lower[d]) * s;
    }
    return x;
}

std::vector<double> apply_scaling(const ScalingTransform& t, std::span<const double> point) {
    return t.apply(point);
}

MinMaxScaler MinMaxScaler::fit(std::span<const double> values) {
    if (values.empty()) throw InputError("min/max scaler: no values");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    MinMaxScaler s{*mn, *mx};
    if (!(s.hi > s.lo)) s.hi = s.lo + 1.0;  // constant data: plain shift
    return s;
}

std::string design_csv(const SampleDesign& design) {
    struct Row {
        std::size_t index;
        std::span<const double> y;
        Subset set;
    };
    std::vector<Row> rows;
    rows.reserve(design.m());
    for (std::size_t i = 0; i < design.m1(); ++i)
        rows.push_back({design.grid_index_I[i], design.y_I.point(i), Subset::I});
    for (std::size_t i = 0; i < design.m2(); ++i)
        rows.push_back({design.grid_index_II[i], design.y_II.point(i), Subset::II});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.index < b.index; });

    std::ostringstream os;
    os << "index";
    for (std::size_t d = 0; d < design.domain.dim(); ++d) os << ",y" << d;
    os << ",set\n";
    for (const auto& r : rows) {
        os << r.index;
        for (double v : r.y) os << ',' << format_double(v);
        os << ',' << (r.set == Subset::I ? "I" : "II") << '\n';
    }
    return os.str();
}

void write_design_csv(const SampleDesign& design, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path.string());
    f << design_csv(design);
}

}  // namespace mfnn::design
