#pragma once

// Training designs (Y_I, Y_II), Monte Carlo draws and input scaling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mfnn/box.hpp"

namespace mfnn::design {

/// Row-major list of points of a fixed dimension.
struct PointSet {
    std::size_t dim = 0;
    std::vector<double> values;

    PointSet() = default;
    explicit PointSet(std::size_t d) : dim(d) {}

    std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
    std::span<const double> point(std::size_t i) const { return {values.data() + i * dim, dim}; }
    std::span<double> point(std::size_t i) { return {values.data() + i * dim, dim}; }
    void push_back(std::span<const double> p);

    bool operator==(const PointSet&) const = default;
};

enum class Subset : std::uint8_t { I, II };

/// Y_I (solver pairs) and Y_II (network-completed) of a structured design.
/// grid_index_I / grid_index_II give the enumeration position of each point
/// in the underlying grid (first dimension slowest).
struct SampleDesign {
    Box domain;
    PointSet y_I;
    PointSet y_II;
    std::vector<std::size_t> grid_index_I;
    std::vector<std::size_t> grid_index_II;

    std::size_t m1() const { return y_I.size(); }
    std::size_t m2() const { return y_II.size(); }
    std::size_t m() const { return m1() + m2(); }
    /// M_1 / M.
    double ratio() const { return m() == 0 ? 0.0 : static_cast<double>(m1()) / static_cast<double>(m()); }

    /// All M points, Y_I first.
    PointSet all_points() const;
};

/// M equispaced points including both ends; every `stride`-th point
/// (index 0, stride, 2 stride, ...) is in Y_I. stride 1 puts every point in Y_I.
SampleDesign build_design_1d(std::size_t m, const Box& domain, std::size_t stride = 4);

/// n1 x n2 tensor grid; (i, j) is in Y_I iff both i and j are even.
SampleDesign build_design_2d(std::size_t n1, std::size_t n2, const Box& domain);

/// N i.i.d. uniform points. Coordinate j of point k is a function of
/// (seed, k, j) only, so any sub-range can be regenerated independently.
PointSet draw_mc_samples(std::size_t n, const Box& domain, std::uint64_t seed);
/// Points [first, first + count) of the same stream.
PointSet draw_mc_range(std::size_t first, std::size_t count, const Box& domain, std::uint64_t seed);

/// Per-dimension affine map from `source` onto [target_lower, target_upper]^d.
struct ScalingTransform {
    Box source;
    double target_lower = 0.0;
    double target_upper = 1.0;

    static ScalingTransform unit(const Box& source) { return {source, 0.0, 1.0}; }

    std::size_t dim() const { return source.dim(); }
    void validate() const;

    std::vector<double> apply(std::span<const double> x) const;
    std::vector<double> inverse(std::span<const double> z) const;
    void apply_in_place(std::span<double> x) const;

    bool operator==(const ScalingTransform&) const = default;
};

std::vector<double> apply_scaling(const ScalingTransform& t, std::span<const double> point);

/// Affine map of one scalar onto [0, 1] from observed min/max.
struct MinMaxScaler {
    double lo = 0.0;
    double hi = 1.0;

    static MinMaxScaler fit(std::span<const double> values);
    double apply(double v) const { return (v - lo) / (hi - lo); }
    double inverse(double z) const { return lo + z * (hi - lo); }

    bool operator==(const MinMaxScaler&) const = default;
};

/// CSV with columns index,y0,...,y{d-1},set; rows in grid order.
void write_design_csv(const SampleDesign& design, const std::filesystem::path& path);
std::string design_csv(const SampleDesign& design);

}  // namespace mfnn::design
