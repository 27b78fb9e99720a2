#pragma once

#include "mtwf/common.hpp"
#include "mtwf/rng.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtwf::nn {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        v.assign(n, 0.0);
    }
};

// Flat named parameter set. Insertion order is preserved so every iteration
// (Adam, EMA, checkpointing) is deterministic.
class Parameters {
public:
    Tensor& add(const std::string& name, std::vector<std::size_t> shape);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t total_values() const;

    // Schemas match: same names in the same order with the same shapes.
    bool same_schema(const Parameters& o) const;
    void require_same_schema(const Parameters& o, const char* what) const;

    // this = alpha*this + (1-alpha)*other, elementwise (the EMA teacher
    // update; Parameters supports linear blending by contract).
    void ema_blend(const Parameters& other, double alpha);

    void fill(double value);

    std::uint64_t value_hash() const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<Tensor> tensors_;
};

enum class Activation { Elu, Tanh, Sigmoid, Softmax, Linear };

struct LayerSpec {
    enum class Kind { Dense, Conv1D, Dropout, Act, Flatten };
    Kind kind;
    // Dense
    std::size_t in = 0, out = 0;
    // Conv1D
    std::size_t in_ch = 0, out_ch = 0, kernel = 0;
    // Dropout
    double rate = 0.0;
    // Act
    Activation act = Activation::Linear;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel);
    static LayerSpec dropout(double rate);
    static LayerSpec activation(Activation a);
    static LayerSpec flatten();
};

enum class Mode { Train, Eval };

// Per-layer forward state kept for the backward pass: acts[0] is the input,
// acts[i+1] the output of layer i; dropout masks hold the inverted-scaling
// factors actually applied.
struct Cache {
    std::vector<Matrix> acts;
    std::vector<Matrix> dropout_masks;
    bool valid = false;
};

// A named sequential stack (prefix scopes its parameter names, e.g. "enc").
// Widths are validated at construction; conv layers track channel/length
// shape through the stack.
class Sequential {
public:
    Sequential() = default;
    Sequential(std::string prefix, std::size_t input_width, std::vector<LayerSpec> layers);

    const std::string& prefix() const { return prefix_; }
    std::size_t input_width() const { return input_width_; }
    std::size_t output_width() const { return output_width_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }

    // Glorot-uniform weights, zero biases, drawn in layer order from rng.
    void init_params(Parameters& params, Xoshiro256ss& rng) const;

    // dropout_seed fixes the masks of this single call (finite-difference
    // checks rely on replaying identical masks).
    Matrix forward(const Parameters& params, const Matrix& x, Mode mode,
                   std::uint64_t dropout_seed, Cache* cache) const;

    // Accumulates parameter gradients into grads (schema built on demand) and
    // returns the gradient with respect to the input.
    Matrix backward(const Parameters& params, const Cache& cache, const Matrix& d_out,
                    Parameters& grads) const;

    std::size_t param_count() const;

private:
    std::string prefix_;
    std::size_t input_width_ = 0;
    std::size_t output_width_ = 0;
    std::vector<LayerSpec> layers_;
    // Channel/length view of each layer boundary; length 0 means flat.
    struct Shape { std::size_t ch, len; std::size_t width() const { return ch * len; } };
    std::vector<Shape> shapes_; // shapes_[i] = input shape of layer i

    std::string pname(std::size_t layer, const char* which) const;
};

enum class LossKind { MSE, BCE, CE };

const char* loss_name(LossKind k);

// Batch-mean loss and its gradient with respect to pred. MSE and BCE average
// over all elements; CE averages the per-row cross-entropy over rows.
// Probabilities are clamped to [1e-7, 1-1e-7] before any log.
struct LossValue {
    double value = 0.0;
    Matrix grad;
};
LossValue loss_eval(LossKind kind, const Matrix& pred, const Matrix& target);

// Adam with bias correction; lr is resolved per tensor by the caller.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long step = 0;
    std::unordered_map<std::string, Tensor> m, v;
};

// Effective learning rate per tensor name. Tensors with zero gradient still
// advance their moments (standard Adam over the full schema).
void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const std::unordered_map<std::string, double>& lr_by_tensor);

// Multiplies every group learning rate by `factor` after `patience` epochs
// without improvement of the monitored loss.
struct PlateauScheduler {
    double factor = 0.75;
    int patience = 6;
    double best = 0.0;
    int since_improve = 0;
    bool started = false;

    // Returns true when a reduction fires at this epoch.
    bool observe(double epoch_loss);
};

struct EarlyStopping {
    int patience = 12;
    double best = 0.0;
    int since_improve = 0;
    bool started = false;

    // Returns true when training should stop after this epoch.
    bool observe(double epoch_loss);
};

} // namespace mtwf::nn
