#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "madar/core.hpp"
#include "madar/rng.hpp"

namespace madar {

/// Which output units participate in the softmax. The head is always built at
/// full width; scenarios restrict it per task through this mask.
class OutputMask {
public:
    OutputMask() = default;

    static OutputMask all(int width) {
        OutputMask m;
        m.active_.assign(static_cast<std::size_t>(width), 1);
        return m;
    }

    static OutputMask of(int width, const std::vector<int>& classes) {
        if (width < 1) throw Error("OutputMask: width must be >= 1");
        OutputMask m;
        m.active_.assign(static_cast<std::size_t>(width), 0);
        for (int c : classes) {
            if (c < 0 || c >= width) {
                throw Error("OutputMask: class " + std::to_string(c) +
                            " outside head of width " + std::to_string(width));
            }
            m.active_[static_cast<std::size_t>(c)] = 1;
        }
        if (m.count_active() == 0) throw Error("OutputMask: no active classes");
        return m;
    }

    int width() const { return static_cast<int>(active_.size()); }
    bool is_active(int c) const {
        return c >= 0 && c < width() && active_[static_cast<std::size_t>(c)] != 0;
    }
    int count_active() const {
        int n = 0;
        for (auto a : active_) n += a;
        return n;
    }

private:
    std::vector<std::uint8_t> active_;
};

struct AffineLayer {
    Eigen::MatrixXd w;  // in x out
    Eigen::VectorXd b;
};

struct BatchNorm {
    Eigen::VectorXd gamma, beta, running_mean, running_var;
};

/// Feed-forward classifier. Hidden layers run affine -> batch-norm -> ReLU ->
/// dropout; the output layer is a bare affine producing logits.
struct MlpModel {
    std::vector<int> layer_dims;       // [input, hidden..., output]
    std::vector<AffineLayer> layers;   // hidden affines + output affine
    std::vector<BatchNorm> bn;         // one per hidden layer
    double dropout_rate = 0.0;
    int penultimate_index = 0;         // hidden layer whose activations are "the embedding"
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    int num_hidden() const { return static_cast<int>(bn.size()); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
};

/// He-initialized model: w ~ N(0, 2 / fan_in), biases zero, batch-norm at
/// identity (gamma 1, beta 0, running stats 0/1).
inline MlpModel mlp_init(const std::vector<int>& layer_dims, double dropout_rate,
                         std::uint64_t seed) {
    if (layer_dims.size() < 2) throw Error("mlp_init: need at least input and output dims");
    for (int d : layer_dims) {
        if (d < 1) throw Error("mlp_init: every layer width must be >= 1");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw Error("mlp_init: dropout_rate must lie in [0, 1)");
    }

    MlpModel m;
    m.layer_dims = layer_dims;
    m.dropout_rate = dropout_rate;
    m.penultimate_index = static_cast<int>(layer_dims.size()) - 3;  // last hidden layer
    if (m.penultimate_index < 0) m.penultimate_index = 0;

    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        AffineLayer layer;
        layer.w.resize(fan_in, fan_out);
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (int i = 0; i < fan_in; ++i) {
            for (int j = 0; j < fan_out; ++j) layer.w(i, j) = std_dev * rng.normal();
        }
        layer.b = Eigen::VectorXd::Zero(fan_out);
        m.layers.push_back(std::move(layer));
        if (l + 2 < layer_dims.size()) {
            BatchNorm bn;
            bn.gamma = Eigen::VectorXd::Ones(fan_out);
            bn.beta = Eigen::VectorXd::Zero(fan_out);
            bn.running_mean = Eigen::VectorXd::Zero(fan_out);
            bn.running_var = Eigen::VectorXd::Ones(fan_out);
            m.bn.push_back(std::move(bn));
        }
    }
    return m;
}

namespace detail {

struct HiddenTrace {
    Eigen::MatrixXd x_in;       // input to the affine
    Eigen::MatrixXd x_hat;      // normalized pre-scale activations
    Eigen::VectorXd inv_std;    // 1 / sqrt(batch var + eps)
    Eigen::MatrixXd relu_out;   // post-ReLU, pre-dropout
    Eigen::MatrixXd drop_mask;  // inverted-dropout mask (empty when rate is 0)
};

struct ForwardTrace {
    std::vector<HiddenTrace> hidden;
    Eigen::MatrixXd head_in;  // input to the output affine
};

}  // namespace detail

/// Train-mode forward pass: batch statistics normalize, running statistics are
/// updated (biased variance on both paths), dropout is the inverted kind. The
/// trace carries everything backward() needs.
inline Eigen::MatrixXd forward_train(MlpModel& model, const Eigen::MatrixXd& batch,
                                     Rng& dropout_rng, detail::ForwardTrace* trace,
                                     bool update_running = true) {
    if (batch.cols() != model.input_dim()) {
        throw Error("forward: batch width " + std::to_string(batch.cols()) +
                    " does not match model input " + std::to_string(model.input_dim()));
    }
    if (batch.rows() == 0) throw Error("forward: empty batch");
    const auto bsz = static_cast<double>(batch.rows());

    Eigen::MatrixXd a = batch;
    if (trace) trace->hidden.resize(static_cast<std::size_t>(model.num_hidden()));
    for (int l = 0; l < model.num_hidden(); ++l) {
        const AffineLayer& lin = model.layers[static_cast<std::size_t>(l)];
        BatchNorm& bn = model.bn[static_cast<std::size_t>(l)];
        detail::HiddenTrace* ht = trace ? &trace->hidden[static_cast<std::size_t>(l)] : nullptr;
        if (ht) ht->x_in = a;

        Eigen::MatrixXd z = (a * lin.w).rowwise() + lin.b.transpose();
        const Eigen::RowVectorXd mu = z.colwise().mean();
        const Eigen::RowVectorXd var =
            (z.rowwise() - mu).array().square().colwise().sum() / bsz;
        if (update_running) {
            bn.running_mean = (1.0 - model.bn_momentum) * bn.running_mean +
                              model.bn_momentum * mu.transpose();
            bn.running_var = (1.0 - model.bn_momentum) * bn.running_var +
                             model.bn_momentum * var.transpose();
        }
        const Eigen::RowVectorXd inv_std =
            (var.array() + model.bn_eps).sqrt().inverse();
        Eigen::MatrixXd x_hat =
            (z.rowwise() - mu).array().rowwise() * inv_std.array();
        Eigen::MatrixXd y =
            (x_hat.array().rowwise() * bn.gamma.transpose().array()).rowwise() +
            bn.beta.transpose().array();
        Eigen::MatrixXd r = y.cwiseMax(0.0);
        if (ht) {
            ht->x_hat = std::move(x_hat);
            ht->inv_std = inv_std.transpose();
            ht->relu_out = r;
        }
        if (model.dropout_rate > 0.0) {
            const double keep = 1.0 - model.dropout_rate;
            Eigen::MatrixXd mask(r.rows(), r.cols());
            for (Eigen::Index i = 0; i < mask.rows(); ++i) {
                for (Eigen::Index j = 0; j < mask.cols(); ++j) {
                    mask(i, j) = dropout_rng.real01() >= model.dropout_rate ? 1.0 / keep : 0.0;
                }
            }
            a = r.cwiseProduct(mask);
            if (ht) ht->drop_mask = std::move(mask);
        } else {
            a = std::move(r);
        }
    }
    if (trace) trace->head_in = a;
    return (a * model.layers.back().w).rowwise() + model.layers.back().b.transpose();
}

/// Eval-mode forward pass: running statistics normalize, no dropout.
inline Eigen::MatrixXd forward_eval(const MlpModel& model, const Eigen::MatrixXd& batch) {
    if (batch.cols() != model.input_dim()) {
        throw Error("forward: batch width " + std::to_string(batch.cols()) +
                    " does not match model input " + std::to_string(model.input_dim()));
    }
    Eigen::MatrixXd a = batch;
    for (int l = 0; l < model.num_hidden(); ++l) {
        const AffineLayer& lin = model.layers[static_cast<std::size_t>(l)];
        const BatchNorm& bn = model.bn[static_cast<std::size_t>(l)];
        Eigen::MatrixXd z = (a * lin.w).rowwise() + lin.b.transpose();
        const Eigen::ArrayXd inv_std = (bn.running_var.array() + model.bn_eps).sqrt().inverse();
        a = ((((z.rowwise() - bn.running_mean.transpose()).array().rowwise() *
               inv_std.transpose()) .rowwise() *
              bn.gamma.transpose().array()).rowwise() +
             bn.beta.transpose().array())
                .max(0.0)
                .matrix();
    }
    return (a * model.layers.back().w).rowwise() + model.layers.back().b.transpose();
}

/// Hidden-layer embedding used for replay in activation space: the affine +
/// ReLU chain up to and including hidden layer `hidden_index`, with batch-norm
/// and dropout omitted. -1 means the model's designated penultimate layer.
inline Eigen::MatrixXd extract_activations(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                           int hidden_index = -1) {
    if (hidden_index == -1) hidden_index = model.penultimate_index;
    if (hidden_index < 0 || hidden_index >= model.num_hidden()) {
        throw Error("extract_activations: hidden layer " + std::to_string(hidden_index) +
                    " out of range (model has " + std::to_string(model.num_hidden()) + ")");
    }
    if (inputs.cols() != model.input_dim()) {
        throw Error("extract_activations: input width " + std::to_string(inputs.cols()) +
                    " does not match model input " + std::to_string(model.input_dim()));
    }
    Eigen::MatrixXd a = inputs;
    for (int l = 0; l <= hidden_index; ++l) {
        const AffineLayer& lin = model.layers[static_cast<std::size_t>(l)];
        a = ((a * lin.w).rowwise() + lin.b.transpose()).cwiseMax(0.0);
    }
    return a;
}

/// Cross-entropy restricted to the mask's active classes: softmax is computed
/// over active logits only, inactive units get neither probability nor
/// gradient. Returns mean loss; fills d_logits (mean-reduced) when non-null.
inline double masked_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& targets,
                                   const OutputMask& mask, Eigen::MatrixXd* d_logits = nullptr) {
    const auto n = static_cast<std::size_t>(logits.rows());
    if (targets.size() != n) throw Error("masked_cross_entropy: batch/target size mismatch");
    if (mask.width() != logits.cols()) {
        throw Error("masked_cross_entropy: mask width does not match logits");
    }
    if (mask.count_active() == 0) throw Error("masked_cross_entropy: no active classes");
    if (d_logits) d_logits->setZero(logits.rows(), logits.cols());

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = targets[i];
        if (!mask.is_active(y)) {
            throw Error("masked_cross_entropy: target class " + std::to_string(y) +
                        " is not active in row " + std::to_string(i));
        }
        const auto row = static_cast<Eigen::Index>(i);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < mask.width(); ++c) {
            if (mask.is_active(c)) max_logit = std::max(max_logit, logits(row, c));
        }
        double denom = 0.0;
        for (int c = 0; c < mask.width(); ++c) {
            if (mask.is_active(c)) denom += std::exp(logits(row, c) - max_logit);
        }
        total += -(logits(row, y) - max_logit - std::log(denom));
        if (d_logits) {
            for (int c = 0; c < mask.width(); ++c) {
                if (!mask.is_active(c)) continue;
                const double p = std::exp(logits(row, c) - max_logit) / denom;
                (*d_logits)(row, c) = (p - (c == y ? 1.0 : 0.0)) / static_cast<double>(n);
            }
        }
    }
    return total / static_cast<double>(n);
}

struct AffineGrad {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
};

struct BnGrad {
    Eigen::VectorXd gamma, beta;
};

struct Gradients {
    std::vector<AffineGrad> layers;
    std::vector<BnGrad> bn;
};

/// One train-mode forward/backward pass. Returns the mean masked loss and
/// fills `grads` with d(loss)/d(param) for every affine and batch-norm
/// parameter. Running statistics update unless told otherwise (finite
/// difference probes must leave them alone).
inline double loss_and_gradients(MlpModel& model, const Eigen::MatrixXd& batch,
                                 const std::vector<int>& targets, const OutputMask& mask,
                                 Rng& dropout_rng, Gradients& grads,
                                 bool update_running = true) {
    detail::ForwardTrace trace;
    const Eigen::MatrixXd logits =
        forward_train(model, batch, dropout_rng, &trace, update_running);
    Eigen::MatrixXd delta;
    const double loss = masked_cross_entropy(logits, targets, mask, &delta);

    grads.layers.resize(model.layers.size());
    grads.bn.resize(model.bn.size());

    // Output affine.
    {
        AffineGrad& g = grads.layers.back();
        g.w.noalias() = trace.head_in.transpose() * delta;
        g.b = delta.colwise().sum().transpose();
        delta = (delta * model.layers.back().w.transpose()).eval();
    }

    const auto bsz = static_cast<double>(batch.rows());
    for (int l = model.num_hidden() - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        const detail::HiddenTrace& ht = trace.hidden[li];

        if (model.dropout_rate > 0.0) delta = delta.cwiseProduct(ht.drop_mask).eval();
        delta = delta.cwiseProduct(
            (ht.relu_out.array() > 0.0).cast<double>().matrix()).eval();

        // Batch-norm backward with batch statistics as functions of the batch.
        BnGrad& bg = grads.bn[li];
        bg.gamma = delta.cwiseProduct(ht.x_hat).colwise().sum().transpose();
        bg.beta = delta.colwise().sum().transpose();
        const Eigen::ArrayXXd d_xhat =
            delta.array().rowwise() * model.bn[li].gamma.transpose().array();
        Eigen::ArrayXXd dz_arr = d_xhat * bsz;
        dz_arr.rowwise() -= d_xhat.colwise().sum();
        dz_arr -= ht.x_hat.array().rowwise() * (d_xhat * ht.x_hat.array()).colwise().sum();
        dz_arr.rowwise() *= ht.inv_std.transpose().array() / bsz;
        const Eigen::MatrixXd dz = dz_arr.matrix();

        AffineGrad& g = grads.layers[li];
        g.w.noalias() = ht.x_in.transpose() * dz;
        g.b = dz.colwise().sum().transpose();
        if (l > 0) delta = (dz * model.layers[li].w.transpose()).eval();
    }
    return loss;
}

/// Adam with bias correction; epsilon sits outside the square root.
struct OptimizerState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step_count = 0;
    std::vector<AffineGrad> m_layers, v_layers;
    std::vector<BnGrad> m_bn, v_bn;
};

inline OptimizerState adam_init(const MlpModel& model, double lr) {
    if (!(lr >= 0.0)) throw Error("adam_init: learning rate must be >= 0");
    OptimizerState s;
    s.lr = lr;
    for (const AffineLayer& l : model.layers) {
        AffineGrad z{Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()),
                     Eigen::VectorXd::Zero(l.b.size())};
        s.m_layers.push_back(z);
        s.v_layers.push_back(z);
    }
    for (const BatchNorm& bn : model.bn) {
        BnGrad z{Eigen::VectorXd::Zero(bn.gamma.size()), Eigen::VectorXd::Zero(bn.beta.size())};
        s.m_bn.push_back(z);
        s.v_bn.push_back(z);
    }
    return s;
}

namespace detail {

template <class Mat>
void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v, const OptimizerState& s) {
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = (s.beta2 * v.array() + (1.0 - s.beta2) * grad.array().square()).matrix();
    param -= (s.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps)).matrix();
}

}  // namespace detail

inline void adam_step(MlpModel& model, const Gradients& grads, OptimizerState& state) {
    if (grads.layers.size() != model.layers.size() || grads.bn.size() != model.bn.size()) {
        throw Error("adam_step: gradient shape does not match model");
    }
    ++state.step_count;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        detail::adam_update(model.layers[l].w, grads.layers[l].w, state.m_layers[l].w,
                            state.v_layers[l].w, state);
        detail::adam_update(model.layers[l].b, grads.layers[l].b, state.m_layers[l].b,
                            state.v_layers[l].b, state);
    }
    for (std::size_t l = 0; l < model.bn.size(); ++l) {
        detail::adam_update(model.bn[l].gamma, grads.bn[l].gamma, state.m_bn[l].gamma,
                            state.v_bn[l].gamma, state);
        detail::adam_update(model.bn[l].beta, grads.bn[l].beta, state.m_bn[l].beta,
                            state.v_bn[l].beta, state);
    }
}

/// Mini-batch training loop. Shuffling, batching and dropout all draw from the
/// one seed, so a (model, state, data, seed) tuple fixes the whole trajectory.
/// Returns the per-epoch mean training loss.
inline std::vector<double> train_task(MlpModel& model, OptimizerState& state,
                                      const LabeledSet& data, const OutputMask& mask,
                                      int epochs, int batch_size, std::uint64_t seed) {
    if (data.size() == 0) throw Error("train_task: empty training set");
    if (data.x.rows() != static_cast<Eigen::Index>(data.y.size())) {
        throw Error("train_task: feature/target row mismatch");
    }
    if (epochs < 0) throw Error("train_task: negative epoch count");
    if (batch_size < 1) throw Error("train_task: batch_size must be >= 1");

    const auto n = static_cast<std::size_t>(data.size());
    Rng rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(epochs));
    Gradients grads;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
            const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                                            n - start);
            Eigen::MatrixXd xb(static_cast<Eigen::Index>(count), data.x.cols());
            std::vector<int> yb(count);
            for (std::size_t i = 0; i < count; ++i) {
                xb.row(static_cast<Eigen::Index>(i)) =
                    data.x.row(static_cast<Eigen::Index>(order[start + i]));
                yb[i] = data.y[order[start + i]];
            }
            const double loss = loss_and_gradients(model, xb, yb, mask, rng, grads);
            adam_step(model, grads, state);
            epoch_loss += loss * static_cast<double>(count);
        }
        trace.push_back(epoch_loss / static_cast<double>(n));
    }
    return trace;
}

/// Masked accuracy on a labeled set: argmax over active logits (ties resolve
/// to the lowest class id).
inline double evaluate(const MlpModel& model, const LabeledSet& data, const OutputMask& mask) {
    if (data.size() == 0) throw Error("evaluate: empty evaluation set");
    if (mask.width() != model.output_dim()) {
        throw Error("evaluate: mask width does not match model head");
    }
    const Eigen::MatrixXd logits = forward_eval(model, data.x);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int best = -1;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < mask.width(); ++c) {
            if (mask.is_active(c) && logits(i, c) > best_v) {
                best_v = logits(i, c);
                best = c;
            }
        }
        correct += (best == data.y[static_cast<std::size_t>(i)]);
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

// --- Checkpointing ---------------------------------------------------------
// Binary little-endian layout: magic "MADARMLP", u32 version, u32 #dims,
// i64 dims, f64 dropout, i32 penultimate, f64 momentum, f64 eps, then per
// affine layer w (row-major f64) and b, then per batch-norm layer gamma,
// beta, running_mean, running_var.

namespace detail {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

template <class T>
void put_pod(std::string& out, T v) {
    put_bytes(out, &v, sizeof(T));
}

inline void put_vec(std::string& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put_pod(out, v[i]);
}

inline void put_mat(std::string& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_pod(out, m(i, j));
    }
}

class ByteReader {
public:
    ByteReader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    template <class T>
    T get() {
        if (pos_ + sizeof(T) > buf_.size()) {
            throw Error("checkpoint '" + path_ + "' is truncated");
        }
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void fill(Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get<double>();
    }

    void fill(Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
        }
    }

    bool exhausted() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'M', 'A', 'D', 'A', 'R', 'M', 'L', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const MlpModel& model, const std::string& path) {
    std::string out;
    detail::put_bytes(out, kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put_pod(out, kCheckpointVersion);
    detail::put_pod(out, static_cast<std::uint32_t>(model.layer_dims.size()));
    for (int d : model.layer_dims) detail::put_pod(out, static_cast<std::int64_t>(d));
    detail::put_pod(out, model.dropout_rate);
    detail::put_pod(out, static_cast<std::int32_t>(model.penultimate_index));
    detail::put_pod(out, model.bn_momentum);
    detail::put_pod(out, model.bn_eps);
    for (const AffineLayer& l : model.layers) {
        detail::put_mat(out, l.w);
        detail::put_vec(out, l.b);
    }
    for (const BatchNorm& bn : model.bn) {
        detail::put_vec(out, bn.gamma);
        detail::put_vec(out, bn.beta);
        detail::put_vec(out, bn.running_mean);
        detail::put_vec(out, bn.running_var);
    }
    write_file_atomic(path, out);
}

inline MlpModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::ByteReader r(buf, path);

    char magic[8];
    for (char& c : magic) c = r.get<char>();
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw Error("'" + path + "' is not a model checkpoint");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw Error("checkpoint '" + path + "' has unsupported version " +
                    std::to_string(version));
    }
    const auto num_dims = r.get<std::uint32_t>();
    if (num_dims < 2 || num_dims > 64) {
        throw Error("checkpoint '" + path + "' has implausible layer count");
    }
    std::vector<int> dims(num_dims);
    for (auto& d : dims) {
        const auto v = r.get<std::int64_t>();
        if (v < 1 || v > (1 << 24)) throw Error("checkpoint '" + path + "' has bad layer width");
        d = static_cast<int>(v);
    }
    const double dropout = r.get<double>();
    const auto penultimate = r.get<std::int32_t>();
    const double momentum = r.get<double>();
    const double eps = r.get<double>();

    MlpModel m = mlp_init(dims, dropout, 0);
    m.bn_momentum = momentum;
    m.bn_eps = eps;
    if (penultimate < 0 || penultimate >= m.num_hidden()) {
        throw Error("checkpoint '" + path + "' has bad penultimate layer index");
    }
    m.penultimate_index = penultimate;
    for (AffineLayer& l : m.layers) {
        r.fill(l.w);
        r.fill(l.b);
    }
    for (BatchNorm& bn : m.bn) {
        r.fill(bn.gamma);
        r.fill(bn.beta);
        r.fill(bn.running_mean);
        r.fill(bn.running_var);
    }
    if (!r.exhausted()) throw Error("checkpoint '" + path + "' has trailing bytes");
    return m;
}

}  // namespace madar
