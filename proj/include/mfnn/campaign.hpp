#pragma once

// Config-driven runs: single campaigns, tolerance sweeps with repetitions,
// cost comparisons and table emission from persisted artifacts.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfnn/config.hpp"
#include "mfnn/pipeline.hpp"

namespace mfnn::campaign {

struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path tolerance_dir(const std::string& label) const { return root / label; }
    std::filesystem::path run_dir(const std::string& label, std::size_t rep) const;
    std::filesystem::path hfmc_dir(const std::string& label, std::size_t rep) const;
};

struct Resolved {
    double bias_constant = 0.0;
    /// h_HF per tolerance entry.
    std::vector<double> h_hf;
};

Resolved resolve(const config::CampaignConfig& cfg);

/// One MFNNMC run; artifacts go to run_dir(label, rep).
pipeline::CampaignOutcome run_mfnnmc(const config::CampaignConfig& cfg, const Resolved& res,
                                     std::size_t tol_index, std::size_t rep, std::size_t threads,
                                     const pipeline::FidelityData* cached = nullptr);

struct HfmcOptions {
    std::size_t threads = 1;
    /// Measure W_HF on a few solves and report N W_HF without the estimate.
    bool cost_only = false;
    /// Overrides the configured / pilot N.
    std::optional<std::size_t> n_samples;
};

/// HFMC at the resolved h_HF. An "auto" N is chosen from the variance of a
/// pilot of HF solves (pilot_samples of them, at most 1000).
pipeline::EstimatorResult run_hfmc(const config::CampaignConfig& cfg, const Resolved& res,
                                   std::size_t tol_index, std::size_t rep, const HfmcOptions& opt);

struct ToleranceSummary {
    std::string label;
    double tol = 0.0;
    double h_lf = 0.0;
    double h_hf = 0.0;
    analysis::ComplianceReport compliance;
    double max_error = 0.0;
    double mean_error = 0.0;
    /// Means over repetitions.
    double n_samples = 0.0;
    analysis::PhaseTimes unit;
    double mfnnmc_total = 0.0;
    double prediction_total = 0.0;
    double hfmc_total = 0.0;
    std::size_t m = 0, m1 = 0, m2 = 0;
};

struct SweepOptions {
    std::size_t threads = 1;
    std::optional<std::size_t> repetitions;
    /// Empty: every tolerance.
    std::vector<std::size_t> tolerance_indices;
};

/// Runs tolerances x repetitions and writes compliance.csv, costs.csv and
/// sweep.json under the output root. Solver data are computed once per
/// tolerance (they do not depend on the seeds).
std::vector<ToleranceSummary> run_sweep(const config::CampaignConfig& cfg, const SweepOptions& opt);

struct SlopeFit {
    std::string series;
    double slope = 0.0;
    std::size_t points = 0;
};

struct CompareReport {
    std::vector<ToleranceSummary> rows;
    std::vector<SlopeFit> slopes;
};

/// Reads sweep artifacts only. Throws ConfigError when the artifacts were
/// produced by a different configuration (hash mismatch) or a run's
/// checkpoint is missing. Writes compare.csv, slopes.csv and loglog.csv.
CompareReport compare(const std::filesystem::path& root, const config::CampaignConfig* current = nullptr);

/// CSV of table 1-4 built from sweep artifacts. Tables 1/3 list
/// eps_tol,N,h_HF,W_HF,h_LF,W_LF; tables 2/4 list the per-network columns.
/// Throws ConfigError when artifacts are missing; nothing partial is written.
std::string emit_table(const std::filesystem::path& root, int table_id);

std::string compliance_csv(const std::vector<ToleranceSummary>& rows, analysis::ErrorMode mode);
std::string costs_csv(const std::vector<ToleranceSummary>& rows);

}  // namespace mfnn::campaign
