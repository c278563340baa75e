#pragma once

// MFNNMC: bi-fidelity data on a structured design, NN1 learns the LF -> HF
// correlation on Y_I, completes HF values on Y_II, NN2 learns y -> Q_HF on
// all M points and is sampled by plain Monte Carlo. HFMC is the baseline.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfnn/analysis.hpp"
#include "mfnn/design.hpp"
#include "mfnn/models.hpp"
#include "mfnn/nnet.hpp"
#include "mfnn/result.hpp"

namespace mfnn::pipeline {

// ---- parallel helpers --------------------------------------------------------

/// Runs fn(i) for i in [0, count) on up to `threads` threads (static chunks).
/// The first exception thrown by any call is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Count, mean and sum of squared deviations; merged with Chan's update.
struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x);
    static Moments merge(const Moments& a, const Moments& b);
    /// Unbiased sample variance (0 for fewer than two values).
    double variance() const;
};

/// Fixed reduction block. Sums are formed per block in index order and the
/// blocks merged by a balanced tree over block index, so the result does not
/// depend on how blocks are distributed over threads.
inline constexpr std::size_t kReductionBlock = 8192;

Moments tree_merge(std::span<const Moments> blocks);

// ---- steps 1-3: bi-fidelity data -------------------------------------------

struct FidelityData {
    /// Q_LF on Y_I (first M_1 entries) then on Y_II.
    std::vector<double> lf_all;
    /// Q_HF on Y_I.
    std::vector<double> hf_on_I;
    /// Wall-clock seconds of all LF / all HF solves.
    double lf_seconds = 0.0;
    double hf_seconds = 0.0;
};

/// Solver failures are rethrown as InputError naming the parameter point.
FidelityData evaluate_fidelity_data(const design::SampleDesign& design,
                                    const models::BiFidelitySpec& spec, std::size_t threads = 1);

// ---- steps 4-6: networks ---------------------------------------------------

/// Input transforms shared by both networks.
struct InputScaling {
    design::ScalingTransform y;
    /// Q_LF coordinate of NN1 inputs, fitted on Y_I.
    design::MinMaxScaler q_lf;
};

nnet::Matrix nn1_inputs(const design::PointSet& ys, std::span<const double> q_lf,
                        const InputScaling& scaling);
nnet::Matrix nn2_inputs(const design::PointSet& ys, const design::ScalingTransform& scaling);

nnet::TrainResult train_nn1(const design::SampleDesign& design, std::span<const double> lf_all,
                            std::span<const double> hf_on_I, const InputScaling& scaling,
                            const nnet::Architecture& arch, const nnet::TrainingConfig& cfg,
                            std::uint64_t seed);

enum class Provenance : std::uint8_t { Solver, Nn1 };

struct AugmentedDataset {
    /// Y_I first, then Y_II.
    design::PointSet points;
    std::vector<double> values;
    std::vector<Provenance> provenance;
    /// Wall-clock seconds of the M_2 NN1 evaluations.
    double predict_seconds = 0.0;

    std::size_t size() const { return values.size(); }
};

/// Solver values on Y_I copied verbatim, NN1 predictions on Y_II.
AugmentedDataset augment_hf(const nnet::NetworkParams& nn1, const design::SampleDesign& design,
                            std::span<const double> lf_all, std::span<const double> hf_on_I,
                            const InputScaling& scaling);

/// Same split with an arbitrary correlation map F(y, q_lf) on Y_II.
AugmentedDataset augment_hf(const std::function<double(std::span<const double>, double)>& correlation,
                            const design::SampleDesign& design, std::span<const double> lf_all,
                            std::span<const double> hf_on_I);

nnet::TrainResult train_nn2(const AugmentedDataset& data, const design::ScalingTransform& scaling,
                            const nnet::Architecture& arch, const nnet::TrainingConfig& cfg,
                            std::uint64_t seed);

struct SurrogateBundle {
    nnet::NetworkParams nn1;
    nnet::NetworkParams nn2;
    InputScaling scaling;
    nnet::TrainingHistory nn1_history;
    nnet::TrainingHistory nn2_history;
    bool has_nn1 = false;
};

// ---- steps 7-8: sampling -----------------------------------------------------

/// Anything that maps a block of parameter points to QoI values.
class Surrogate {
public:
    virtual ~Surrogate() = default;
    virtual std::size_t dim() const = 0;
    /// out.size() == ys.size(); must be safe to call concurrently.
    virtual void evaluate(const design::PointSet& ys, std::span<double> out) const = 0;
};

/// NN2 behind its input scaling.
class NetworkSurrogate final : public Surrogate {
public:
    NetworkSurrogate(nnet::NetworkParams nn2, design::ScalingTransform scaling);
    std::size_t dim() const override { return scaling_.dim(); }
    void evaluate(const design::PointSet& ys, std::span<double> out) const override;

private:
    nnet::NetworkParams nn2_;
    design::ScalingTransform scaling_;
};

/// Pointwise function (exact-QoI oracles, solver calls, stubs).
class FunctionSurrogate final : public Surrogate {
public:
    FunctionSurrogate(std::size_t dim, std::function<double(std::span<const double>)> fn);
    std::size_t dim() const override { return dim_; }
    void evaluate(const design::PointSet& ys, std::span<double> out) const override;

private:
    std::size_t dim_;
    std::function<double(std::span<const double>)> fn_;
};

/// N uniform draws of design::draw_mc_range, generated block by block.
struct SampleStream {
    Box domain;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

struct EstimateOptions {
    /// Estimate E[Q^k].
    int moment = 1;
    std::size_t threads = 1;
};

/// Moments of Q^k over the stream or an explicit sample list.
Moments sample_moments(const Surrogate& s, const SampleStream& stream, const EstimateOptions& opt);
Moments sample_moments(const Surrogate& s, const design::PointSet& samples, const EstimateOptions& opt);

/// Sample mean of the surrogate; cost ledger carries N and the measured W_P2.
EstimatorResult estimate_mfnnmc(const Surrogate& nn2, const SampleStream& stream,
                                const EstimateOptions& opt = {});
EstimatorResult estimate_mfnnmc(const Surrogate& nn2, const design::PointSet& samples,
                                const EstimateOptions& opt = {});

/// Sample mean of Q_HF at step h; ledger carries N and the measured W_HF.
EstimatorResult estimate_hfmc(const models::ForwardModel& model, double h_hf,
                              const SampleStream& stream, const EstimateOptions& opt = {});
EstimatorResult estimate_hfmc(const Surrogate& solver, const design::PointSet& samples,
                              const EstimateOptions& opt = {});

/// Mean wall-clock seconds of one solve at step h over `solves` uniform draws.
double measure_solve_cost(const models::ForwardModel& model, double h, std::size_t solves,
                          std::uint64_t seed);

// ---- full campaign -----------------------------------------------------------

struct DesignSpec {
    /// 1-D: number of points and Y_I stride.
    std::size_t m = 0;
    std::size_t stride = 4;
    /// 2-D: grid points per dimension.
    std::size_t n1 = 0;
    std::size_t n2 = 0;
};

design::SampleDesign build_design(const models::ForwardModel& model, const DesignSpec& spec);

struct NetworkSpec {
    std::vector<std::size_t> hidden_widths{20, 20, 20, 20};
    nnet::Activation activation = nnet::Activation::ReLU;
    nnet::TrainingConfig training;
};

struct RunSpec {
    models::BiFidelitySpec fidelity;
    DesignSpec design;
    analysis::ToleranceBudget budget;
    /// 0 selects N from a pilot of `pilot_samples` surrogate evaluations.
    std::size_t n_samples = 0;
    std::size_t pilot_samples = 10000;
    NetworkSpec nn1;
    NetworkSpec nn2;
    /// Target interval of the y scaling.
    double scaling_lower = 0.0;
    double scaling_upper = 1.0;
    int moment = 1;
    std::uint64_t master_seed = 0;
    std::uint64_t repetition = 0;
    /// Defaults to the model's quadrature reference for k = 1.
    std::optional<double> reference;
};

struct RunOptions {
    std::size_t threads = 1;
    /// Artifacts are written here when set.
    std::optional<std::filesystem::path> artifacts_dir;
    /// Reuse solver data for an identical design and spec (it does not depend on seeds).
    const FidelityData* cached_fidelity = nullptr;
    /// Embedded verbatim in result.json.
    std::string config_echo_json;
    std::string config_hash;
    std::string tolerance_label;
};

struct CampaignOutcome {
    EstimatorResult result;
    SurrogateBundle bundle;
    design::SampleDesign design;
    FidelityData fidelity;
    AugmentedDataset augmented;
    std::size_t pilot_n = 0;
    double pilot_variance = 0.0;
    double pilot_mean = 0.0;
};

/// Steps 1-8 in order. A failure in any step is rethrown as StageError
/// tagged design / fidelity / nn1 / augment / nn2 / pilot / estimate / artifacts.
CampaignOutcome run_mfnnmc(const RunSpec& spec, const RunOptions& options = {});

/// Artifact writers used by run_mfnnmc.
void write_fidelity_csv(const CampaignOutcome& out, const std::filesystem::path& path);
std::string result_json(const CampaignOutcome& out, const RunSpec& spec, const RunOptions& options);

}  // namespace mfnn::pipeline
