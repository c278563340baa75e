#pragma once

// Campaign configuration files (JSON). See README.md for the schema.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mfnn/analysis.hpp"
#include "mfnn/models.hpp"
#include "mfnn/pipeline.hpp"

namespace mfnn::config {

struct BiasConstantSpec {
    enum class Mode { Value, Anchor, Fit };
    Mode mode = Mode::Fit;
    double value = 0.0;
    double anchor_tol = 0.0;
    double anchor_h = 0.0;
    std::vector<double> fit_steps;
    std::size_t fit_draws = 50;
};

struct ToleranceEntry {
    double tol = 0.0;
    std::string label;
    double h_lf = 0.0;
    /// Empty means "auto" (bias bound on the model's step ladder).
    std::optional<double> h_hf;
    pipeline::DesignSpec design;
    /// Empty means "auto" (pilot run).
    std::optional<std::size_t> n_samples;
    pipeline::NetworkSpec nn1;
    pipeline::NetworkSpec nn2;
};

struct CampaignConfig {
    models::ModelId model = models::ModelId::Ode15;
    analysis::ErrorMode error_mode = analysis::ErrorMode::Relative;
    double theta = 0.5;
    double alpha = 0.01;
    std::uint64_t master_seed = 0;
    std::size_t repetitions = 1;
    std::string output_dir = "runs";
    double scaling_lower = 0.0;
    double scaling_upper = 1.0;
    std::size_t pilot_samples = 10000;
    /// Magnitude used to turn a relative tolerance into an absolute one when
    /// choosing h_HF; defaults to the model's quadrature reference.
    std::optional<double> reference_scale;
    BiasConstantSpec bias;
    std::vector<ToleranceEntry> tolerances;

    nlohmann::json echo;
    std::string hash;
};

/// Validates the whole document and throws ConfigError listing every bad field.
CampaignConfig parse_config(const nlohmann::json& doc);
CampaignConfig load_config(const std::filesystem::path& path);

/// Output directory, re-rooted under $MFNN_OUTPUT_ROOT when that is set and
/// the configured directory is relative.
std::filesystem::path output_root(const CampaignConfig& cfg);

/// Label used for per-tolerance artifact directories, e.g. "tol_1e-02".
std::string tolerance_label(double tol);

analysis::ToleranceBudget budget_for(const CampaignConfig& cfg, const ToleranceEntry& entry);

/// C of the bias bound for the configured model.
double resolve_bias_constant(const CampaignConfig& cfg, std::uint64_t seed);

/// h_HF of an entry, resolving "auto" with the given bias constant.
double resolve_h_hf(const CampaignConfig& cfg, const ToleranceEntry& entry, double bias_constant);

pipeline::RunSpec resolve_run(const CampaignConfig& cfg, std::size_t tol_index, std::size_t repetition,
                              double h_hf);

}  // namespace mfnn::config
