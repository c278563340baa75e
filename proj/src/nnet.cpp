#include "mfnn/nnet.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "mfnn/errors.hpp"
#include "mfnn/rng.hpp"

namespace mfnn::nnet {

namespace {

template <typename Derived>
void apply_activation(Activation a, Eigen::MatrixBase<Derived>& z) {
    switch (a) {
        case Activation::ReLU:
            z = z.cwiseMax(0.0);
            break;
        case Activation::Tanh:
            z = z.array().tanh().matrix();
            break;
        case Activation::Sigmoid:
            z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
            break;
        case Activation::Identity:
            break;
    }
}

// Multiplies `delta` in place by sigma'(pre) given pre-activations and outputs.
void apply_derivative(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& out,
                      Eigen::MatrixXd& delta) {
    switch (a) {
        case Activation::ReLU:
            delta = (pre.array() > 0.0).select(delta, 0.0);
            break;
        case Activation::Tanh:
            delta.array() *= 1.0 - out.array().square();
            break;
        case Activation::Sigmoid:
            delta.array() *= out.array() * (1.0 - out.array());
            break;
        case Activation::Identity:
            break;
    }
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    throw InputError("unknown activation '" + name + "'");
}

void Architecture::validate() const {
    if (input_width == 0 || output_width == 0)
        throw InputError("architecture: input and output widths must be >= 1");
    if (hidden_widths.empty()) throw InputError("architecture: at least one hidden layer required");
    if (std::find(hidden_widths.begin(), hidden_widths.end(), 0u) != hidden_widths.end())
        throw InputError("architecture: hidden widths must be >= 1");
    if (output_activation != Activation::Identity)
        throw InputError("architecture: output activation must be identity");
    if (hidden_activation == Activation::Identity)
        throw InputError("architecture: hidden activation must be relu, tanh or sigmoid");
}

std::vector<std::size_t> Architecture::widths() const {
    std::vector<std::size_t> w;
    w.reserve(hidden_widths.size() + 2);
    w.push_back(input_width);
    w.insert(w.end(), hidden_widths.begin(), hidden_widths.end());
    w.push_back(output_width);
    return w;
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

bool NetworkParams::same_shape(const NetworkParams& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].weights.rows() != other.layers[i].weights.rows() ||
            layers[i].weights.cols() != other.layers[i].weights.cols() ||
            layers[i].bias.size() != other.layers[i].bias.size())
            return false;
    }
    return true;
}

std::vector<double> NetworkParams::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers) {
        out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
        out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
}

void NetworkParams::unflatten(std::span<const double> values) {
    if (values.size() != parameter_count()) throw InputError("unflatten: size mismatch");
    std::size_t k = 0;
    for (auto& l : layers) {
        std::copy_n(values.begin() + k, l.weights.size(), l.weights.data());
        k += static_cast<std::size_t>(l.weights.size());
        std::copy_n(values.begin() + k, l.bias.size(), l.bias.data());
        k += static_cast<std::size_t>(l.bias.size());
    }
}

bool NetworkParams::operator==(const NetworkParams& other) const {
    if (!(arch == other.arch) || !same_shape(other)) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].weights != other.layers[i].weights || layers[i].bias != other.layers[i].bias)
            return false;
    }
    return true;
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    NetworkParams p{arch, {}};
    const auto w = arch.widths();
    SplitMix64 rng(seed);
    for (std::size_t l = 1; l < w.size(); ++l) {
        const auto rows = static_cast<Eigen::Index>(w[l]);
        const auto cols = static_cast<Eigen::Index>(w[l - 1]);
        Layer layer{Matrix(rows, cols), Vector::Zero(rows)};
        const double bound = std::sqrt(6.0 / static_cast<double>(w[l - 1]));
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
            layer.weights.data()[i] = rng.uniform(-bound, bound);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

std::string to_string(BiasInit b) {
    return b == BiasInit::Spread ? "spread" : "zero";
}

BiasInit bias_init_from_string(const std::string& name) {
    if (name == "zero") return BiasInit::Zero;
    if (name == "spread") return BiasInit::Spread;
    throw InputError("unknown bias init '" + name + "'");
}

void InitConfig::validate() const {
    if (!(input_lower < input_upper) || !std::isfinite(input_lower) || !std::isfinite(input_upper))
        throw ConfigError("init: input box must satisfy lower < upper");
    if (!(hidden_bias_range >= 0.0) || !std::isfinite(hidden_bias_range))
        throw ConfigError("init: hidden_bias_range must be >= 0");
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed, const InitConfig& init) {
    init.validate();
    NetworkParams p = init_network(arch, seed);
    if (init.bias == BiasInit::Zero) return p;
    // separate stream so the weights match the zero-bias draw
    SplitMix64 rng(SplitMix64::mix(seed ^ 0x5eedb1a5ULL));
    Layer& first = p.layers.front();
    for (Eigen::Index i = 0; i < first.weights.rows(); ++i) {
        double b = 0.0;
        for (Eigen::Index j = 0; j < first.weights.cols(); ++j)
            b -= first.weights(i, j) * rng.uniform(init.input_lower, init.input_upper);
        first.bias[i] = b;
    }
    for (std::size_t l = 1; l + 1 < p.layers.size(); ++l)
        for (Eigen::Index i = 0; i < p.layers[l].bias.size(); ++i)
            p.layers[l].bias[i] = rng.uniform(-init.hidden_bias_range, init.hidden_bias_range);
    return p;
}

NetworkParams zeros_like(const NetworkParams& like) {
    NetworkParams z{like.arch, {}};
    z.layers.reserve(like.layers.size());
    for (const auto& l : like.layers)
        z.layers.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()),
                            Vector::Zero(l.bias.size())});
    return z;
}

std::vector<double> forward(const NetworkParams& params, std::span<const double> input) {
    if (input.size() != params.arch.input_width)
        throw InputError("forward: input has " + std::to_string(input.size()) +
                         " entries, network expects " + std::to_string(params.arch.input_width));
    Vector z = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    const std::size_t last = params.layers.size() - 1;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        Vector a = params.layers[l].weights * z + params.layers[l].bias;
        apply_activation(l == last ? params.arch.output_activation : params.arch.hidden_activation, a);
        z = std::move(a);
    }
    return {z.data(), z.data() + z.size()};
}

Matrix forward_batch(const NetworkParams& params, const Matrix& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != params.arch.input_width)
        throw InputError("forward_batch: input width mismatch");
    // Column-per-sample keeps the layer products as W * Z.
    Eigen::MatrixXd z = inputs.transpose();
    const std::size_t last = params.layers.size() - 1;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        Eigen::MatrixXd a = params.layers[l].weights * z;
        a.colwise() += params.layers[l].bias;
        apply_activation(l == last ? params.arch.output_activation : params.arch.hidden_activation, a);
        z = std::move(a);
    }
    return z.transpose();
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out{Matrix(static_cast<Eigen::Index>(rows.size()), inputs.cols()),
                Matrix(static_cast<Eigen::Index>(rows.size()), targets.cols())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
        out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

LossGradient loss_and_gradient(const NetworkParams& params, const Matrix& inputs,
                               const Matrix& targets) {
    const auto batch = inputs.rows();
    if (batch == 0) throw InputError("loss_and_gradient: empty batch");
    if (targets.rows() != batch) throw InputError("loss_and_gradient: input/target count mismatch");
    if (static_cast<std::size_t>(inputs.cols()) != params.arch.input_width ||
        static_cast<std::size_t>(targets.cols()) != params.arch.output_width)
        throw InputError("loss_and_gradient: dimension mismatch");

    const std::size_t n_layers = params.layers.size();
    // One column per sample; pre[l] / out[l + 1] belong to layer l.
    std::vector<Eigen::MatrixXd> pre(n_layers);
    std::vector<Eigen::MatrixXd> out(n_layers + 1);
    out[0] = inputs.transpose();
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = params.layers[l].weights * out[l];
        pre[l].colwise() += params.layers[l].bias;
        out[l + 1] = pre[l];
        apply_activation(l + 1 == n_layers ? params.arch.output_activation
                                           : params.arch.hidden_activation,
                         out[l + 1]);
    }

    const double inv_batch = 1.0 / static_cast<double>(batch);
    Eigen::MatrixXd residual = out[n_layers] - targets.transpose();
    LossGradient result{residual.squaredNorm() * inv_batch, zeros_like(params)};

    Eigen::MatrixXd delta = (2.0 * inv_batch) * residual;
    for (std::size_t k = n_layers; k-- > 0;) {
        apply_derivative(k + 1 == n_layers ? params.arch.output_activation
                                           : params.arch.hidden_activation,
                         pre[k], out[k + 1], delta);
        result.grads.layers[k].weights.noalias() = delta * out[k].transpose();
        result.grads.layers[k].bias = delta.rowwise().sum();
        if (k > 0) delta = params.layers[k].weights.transpose() * delta;
    }
    return result;
}

double mean_squared_error(const NetworkParams& params, const Matrix& inputs, const Matrix& targets) {
    if (inputs.rows() == 0) throw InputError("mean_squared_error: empty set");
    const Matrix pred = forward_batch(params, inputs);
    return (pred - targets).squaredNorm() / static_cast<double>(inputs.rows());
}

AdamState AdamState::zeros(const NetworkParams& like) {
    AdamState s;
    s.m = zeros_like(like).layers;
    s.v = zeros_like(like).layers;
    return s;
}

void adam_step(NetworkParams& params, AdamState& state, const NetworkParams& grads, double lr,
               const AdamConfig& cfg) {
    if (!params.same_shape(grads) || state.m.size() != params.layers.size())
        throw InputError("adam_step: shape mismatch");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weights, state.m[l].weights, state.v[l].weights,
               grads.layers[l].weights);
        update(params.layers[l].bias, state.m[l].bias, state.v[l].bias, grads.layers[l].bias);
    }
}

void TrainingConfig::validate() const {
    if (epochs == 0) throw ConfigError("training: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("training: batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("training: learning_rate must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("training: validation_fraction must lie in [0, 1)");
    if (const auto* r = std::get_if<ReduceOnPlateau>(&lr_schedule)) {
        if (!(r->factor > 0.0 && r->factor < 1.0))
            throw ConfigError("training: plateau factor must lie in (0, 1)");
        if (r->patience == 0) throw ConfigError("training: plateau patience must be >= 1");
        if (!(r->min_lr >= 0.0)) throw ConfigError("training: plateau floor must be >= 0");
    }
    init.validate();
}

TrainResult train(const Architecture& arch, const Dataset& data, const TrainingConfig& cfg,
                  std::uint64_t seed) {
    cfg.validate();
    arch.validate();
    if (static_cast<std::size_t>(data.inputs.cols()) != arch.input_width ||
        static_cast<std::size_t>(data.targets.cols()) != arch.output_width ||
        data.targets.rows() != data.inputs.rows())
        throw InputError("train: dataset does not match architecture");

    const std::size_t n = data.size();
    SplitMix64 rng(cfg.shuffle_seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::size_t n_val = 0;
    if (cfg.validation_fraction > 0.0) {
        shuffle(std::span(order), rng);
        n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
        n_val = std::max<std::size_t>(n_val, 1);
    }
    if (n_val >= n || n - n_val < cfg.batch_size)
        throw ConfigError("train: " + std::to_string(n - std::min(n, n_val)) +
                          " training samples cannot fill a batch of " +
                          std::to_string(cfg.batch_size));

    std::vector<std::size_t> train_rows(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
    const std::vector<std::size_t> val_rows(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    const Dataset val = data.subset(val_rows);

    TrainResult result{init_network(arch, seed, cfg.init), {}};
    result.history.train_size = train_rows.size();
    result.history.validation_size = val_rows.size();
    result.history.epochs.reserve(cfg.epochs);
    AdamState state = AdamState::zeros(result.params);

    double lr = cfg.learning_rate;
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    Matrix bx, by;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(std::span(train_rows), rng);
        double weighted = 0.0;
        for (std::size_t start = 0; start < train_rows.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(train_rows.size(), start + cfg.batch_size);
            const auto rows = static_cast<Eigen::Index>(stop - start);
            bx.resize(rows, data.inputs.cols());
            by.resize(rows, data.targets.cols());
            for (Eigen::Index i = 0; i < rows; ++i) {
                const auto src = static_cast<Eigen::Index>(train_rows[start + static_cast<std::size_t>(i)]);
                bx.row(i) = data.inputs.row(src);
                by.row(i) = data.targets.row(src);
            }
            const LossGradient lg = loss_and_gradient(result.params, bx, by);
            if (!std::isfinite(lg.loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1));
            adam_step(result.params, state, lg.grads, lr, cfg.adam);
            weighted += lg.loss * static_cast<double>(rows);
        }

        EpochRecord rec;
        rec.train_loss = weighted / static_cast<double>(train_rows.size());
        rec.learning_rate = lr;
        if (n_val > 0) {
            rec.validation_loss = mean_squared_error(result.params, val.inputs, val.targets);
            if (!std::isfinite(*rec.validation_loss))
                throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch + 1));
        }
        result.history.epochs.push_back(rec);

        if (const auto* plateau = std::get_if<ReduceOnPlateau>(&cfg.lr_schedule)) {
            const double monitored = rec.validation_loss.value_or(rec.train_loss);
            if (monitored < best) {
                best = monitored;
                stale = 0;
            } else if (++stale >= plateau->patience) {
                lr = std::max(lr * plateau->factor, plateau->min_lr);
                stale = 0;
            }
        }
    }

    const Dataset tr = data.subset(train_rows);
    result.history.final_train_loss = mean_squared_error(result.params, tr.inputs, tr.targets);
    if (!std::isfinite(result.history.final_train_loss))
        throw TrainingError("non-finite final training loss");
    return result;
}

namespace {

constexpr char kMagic[8] = {'M', 'F', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& buf, T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        buf.insert(buf.end(), bytes.begin(), bytes.end());
    } else {
        const auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
        buf.insert(buf.end(), bytes.begin(), bytes.end());
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) throw InputError("checkpoint: truncated data");
        std::array<std::uint8_t, sizeof(T)> raw;
        std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), sizeof(T), raw.begin());
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        pos_ += sizeof(T);
        return std::bit_cast<T>(raw);
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const NetworkParams& params) {
    std::vector<std::uint8_t> buf(std::begin(kMagic), std::end(kMagic));
    put(buf, kVersion);
    put(buf, static_cast<std::uint32_t>(params.arch.input_width));
    put(buf, static_cast<std::uint32_t>(params.arch.output_width));
    put(buf, static_cast<std::uint32_t>(params.arch.hidden_widths.size()));
    for (auto w : params.arch.hidden_widths) put(buf, static_cast<std::uint32_t>(w));
    put(buf, static_cast<std::uint8_t>(params.arch.hidden_activation));
    put(buf, static_cast<std::uint8_t>(params.arch.output_activation));
    for (const auto& l : params.layers) {
        put(buf, static_cast<std::uint32_t>(l.weights.rows()));
        put(buf, static_cast<std::uint32_t>(l.weights.cols()));
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) put(buf, l.weights.data()[i]);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) put(buf, l.bias[i]);
    }
    return buf;
}

NetworkParams deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw InputError("checkpoint: bad magic");
    Reader r(bytes.subspan(sizeof(kMagic)));
    if (r.get<std::uint32_t>() != kVersion) throw InputError("checkpoint: unsupported version");
    Architecture arch;
    arch.input_width = r.get<std::uint32_t>();
    arch.output_width = r.get<std::uint32_t>();
    const auto hidden = r.get<std::uint32_t>();
    if (hidden > 4096) throw InputError("checkpoint: implausible layer count");
    for (std::uint32_t i = 0; i < hidden; ++i) arch.hidden_widths.push_back(r.get<std::uint32_t>());
    const auto ha = r.get<std::uint8_t>();
    const auto oa = r.get<std::uint8_t>();
    if (ha > 3 || oa > 3) throw InputError("checkpoint: bad activation code");
    arch.hidden_activation = static_cast<Activation>(ha);
    arch.output_activation = static_cast<Activation>(oa);
    arch.validate();

    NetworkParams p{arch, {}};
    const auto w = arch.widths();
    for (std::size_t l = 1; l < w.size(); ++l) {
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (rows != w[l] || cols != w[l - 1]) throw InputError("checkpoint: layer shape mismatch");
        Layer layer{Matrix(rows, cols), Vector(rows)};
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = r.get<double>();
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = r.get<double>();
        p.layers.push_back(std::move(layer));
    }
    if (!r.done()) throw InputError("checkpoint: trailing bytes");
    return p;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
    const auto buf = serialize(params);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot open checkpoint for writing: " + path.string());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw InputError("failed writing checkpoint: " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open checkpoint: " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return deserialize(buf);
}

}  // namespace mfnn::nnet
