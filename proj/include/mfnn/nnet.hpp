#pragma once

// Dense feedforward networks: forward evaluation, backpropagation of the
// quadratic cost, Adam, and a mini-batch training loop.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace mfnn::nnet {

enum class Activation : std::uint8_t { ReLU = 0, Tanh = 1, Sigmoid = 2, Identity = 3 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct Architecture {
    std::size_t input_width = 1;
    std::vector<std::size_t> hidden_widths;
    std::size_t output_width = 1;
    Activation hidden_activation = Activation::ReLU;
    Activation output_activation = Activation::Identity;

    /// Throws InputError unless every width is >= 1, there is at least one
    /// hidden layer, and the output activation is Identity.
    void validate() const;

    /// n_0, n_1, ..., n_{L+1}.
    std::vector<std::size_t> widths() const;
    std::size_t layer_count() const { return hidden_widths.size() + 1; }

    bool operator==(const Architecture&) const = default;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Affine map of one layer: weights is n_l x n_{l-1}, bias has n_l entries.
struct Layer {
    Matrix weights;
    Vector bias;
};

struct NetworkParams {
    Architecture arch;
    std::vector<Layer> layers;

    std::size_t parameter_count() const;
    bool same_shape(const NetworkParams& other) const;

    /// Flattened copy of all parameters, layer by layer, weights row-major then bias.
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> values);

    bool operator==(const NetworkParams& other) const;
};

/// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
NetworkParams init_network(const Architecture& arch, std::uint64_t seed);

enum class BiasInit : std::uint8_t { Zero = 0, Spread = 1 };

std::string to_string(BiasInit b);
BiasInit bias_init_from_string(const std::string& name);

/// Spread: first-layer biases b_i = -w_i . c_i with c_i uniform in the input
/// box [input_lower, input_upper]^n, so ReLU kinks start scattered over the
/// data instead of all passing through the origin; deeper hidden biases are
/// uniform in [-hidden_bias_range, hidden_bias_range]. Weights are He-uniform
/// in both modes and identical for the same seed.
struct InitConfig {
    BiasInit bias = BiasInit::Zero;
    double input_lower = 0.0;
    double input_upper = 1.0;
    double hidden_bias_range = 0.1;

    void validate() const;
    bool operator==(const InitConfig&) const = default;
};

NetworkParams init_network(const Architecture& arch, std::uint64_t seed, const InitConfig& init);

/// Same shapes as `like`, every entry zero.
NetworkParams zeros_like(const NetworkParams& like);

std::vector<double> forward(const NetworkParams& params, std::span<const double> input);

/// Row i of the result is the network output for row i of `inputs`.
Matrix forward_batch(const NetworkParams& params, const Matrix& inputs);

/// Paired inputs/targets, one sample per row.
struct Dataset {
    Matrix inputs;
    Matrix targets;

    std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
    Dataset subset(std::span<const std::size_t> rows) const;
};

struct LossGradient {
    double loss = 0.0;
    NetworkParams grads;
};

/// Batch mean of ||f(x) - y||^2 and its gradient with respect to every weight and bias.
LossGradient loss_and_gradient(const NetworkParams& params, const Matrix& inputs,
                               const Matrix& targets);

double mean_squared_error(const NetworkParams& params, const Matrix& inputs,
                          const Matrix& targets);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Layer> m;
    std::vector<Layer> v;
    std::uint64_t step = 0;

    static AdamState zeros(const NetworkParams& like);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(NetworkParams& params, AdamState& state, const NetworkParams& grads, double lr,
               const AdamConfig& cfg = {});

struct FixedRate {};

/// Multiply the rate by `factor` after `patience` epochs without improvement
/// of the monitored loss (validation loss when a validation split exists,
/// training loss otherwise). The rate never drops below `min_lr`.
struct ReduceOnPlateau {
    std::size_t patience = 50;
    double factor = 0.5;
    double min_lr = 1e-5;
};

using LrSchedule = std::variant<FixedRate, ReduceOnPlateau>;

struct TrainingConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 10;
    double learning_rate = 0.002;
    AdamConfig adam;
    double validation_fraction = 0.0;
    LrSchedule lr_schedule = FixedRate{};
    std::uint64_t shuffle_seed = 0;
    InitConfig init;

    void validate() const;
};

struct EpochRecord {
    double train_loss = 0.0;
    std::optional<double> validation_loss;
    double learning_rate = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    /// MSE over the whole training split with the final parameters.
    double final_train_loss = 0.0;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;

    bool operator==(const TrainingHistory&) const = default;
};

struct TrainResult {
    NetworkParams params;
    TrainingHistory history;
};

/// Mini-batch Adam from a seeded initialization (cfg.init). The last batch of an
/// epoch may be smaller than batch_size. Throws TrainingError on a
/// non-finite loss and ConfigError when the training split is smaller than
/// one batch.
TrainResult train(const Architecture& arch, const Dataset& data, const TrainingConfig& cfg,
                  std::uint64_t seed);

// Checkpoints: architecture header followed by row-major little-endian
// float64 arrays per layer. Round trips are bit-exact.
std::vector<std::uint8_t> serialize(const NetworkParams& params);
NetworkParams deserialize(std::span<const std::uint8_t> bytes);
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mfnn::nnet
