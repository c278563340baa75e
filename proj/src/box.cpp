#include "mfnn/box.hpp"

#include <cmath>

#include "mfnn/errors.hpp"

namespace mfnn {

void Box::validate() const {
    if (lower.empty() || lower.size() != upper.size())
        throw InputError("box: lower/upper must be non-empty and of equal length");
    for (std::size_t d = 0; d < lower.size(); ++d) {
        if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(lower[d] < upper[d]))
            throw InputError("box: bounds of dimension " + std::to_string(d) + " are not ordered");
    }
}

bool Box::contains(std::span<const double> point) const {
    if (point.size() != dim()) return false;
    for (std::size_t d = 0; d < dim(); ++d)
        if (!(point[d] >= lower[d] && point[d] <= upper[d])) return false;
    return true;
}

}  // namespace mfnn
