#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "mfnn/ledger.hpp"

namespace mfnn::pipeline {

enum class Method { MFNNMC, HFMC };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct EstimatorResult {
    double estimate = 0.0;
    double sample_variance = 0.0;
    std::size_t n_samples = 0;
    Method method = Method::MFNNMC;
    /// Order k of the estimated moment E[Q^k].
    int moment = 1;
    std::optional<double> reference;
    std::optional<double> error_abs;
    std::optional<double> error_rel;
    analysis::CostLedger cost;

    /// Sets reference and both error fields.
    void set_reference(double ref);
};

}  // namespace mfnn::pipeline
