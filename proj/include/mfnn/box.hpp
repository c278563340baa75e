#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfnn {

/// Axis-aligned hyper-rectangle [lower_0, upper_0] x ... x [lower_d, upper_d].
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const { return lower.size(); }

    /// Throws InputError unless lower/upper have equal, non-zero length and lower < upper.
    void validate() const;
    bool contains(std::span<const double> point) const;

    bool operator==(const Box&) const = default;
};

}  // namespace mfnn
