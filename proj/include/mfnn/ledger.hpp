#pragma once

// Cost accounting for one MFNNMC run and the matching HFMC baseline.

#include <cstddef>

namespace mfnn::analysis {

struct SampleCounts {
    std::size_t m = 0;
    std::size_t m1 = 0;
    std::size_t m2 = 0;
    std::size_t n = 0;

    bool operator==(const SampleCounts&) const = default;
};

/// Per-unit costs (seconds per solve / per network evaluation) and the two
/// training times (seconds, whole phase).
struct PhaseTimes {
    double w_lf = 0.0;
    double w_hf = 0.0;
    double w_t1 = 0.0;
    double w_p1 = 0.0;
    double w_t2 = 0.0;
    double w_p2 = 0.0;

    bool operator==(const PhaseTimes&) const = default;
};

struct CostLedger {
    SampleCounts counts;
    PhaseTimes unit;

    // the six terms of the MFNNMC total
    double lf_solves = 0.0;   // M W_LF
    double hf_solves = 0.0;   // M_1 W_HF
    double train_nn1 = 0.0;   // W_T1
    double predict_nn1 = 0.0; // M_2 W_P1
    double train_nn2 = 0.0;   // W_T2
    double predict_nn2 = 0.0; // N W_P2

    double total_mfnnmc = 0.0;
    /// N W_HF for the same N.
    double total_hfmc = 0.0;

    /// Sum of the six terms, in the order listed above.
    double six_term_sum() const;

    bool operator==(const CostLedger&) const = default;
};

/// Throws InputError on a negative or non-finite time.
CostLedger build_ledger(const SampleCounts& counts, const PhaseTimes& times);

}  // namespace mfnn::analysis
