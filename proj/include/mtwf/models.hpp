#pragma once

#include "mtwf/nn.hpp"
#include "mtwf/preprocess.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace mtwf::models {

enum class ModelKind { SimoDnn, CnnLoc };

const char* kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& s);

// Which slice of an encoded batch a head is trained against.
enum class TargetKind { BuildingFloor8, Building3, Floor5, Coords2 };

struct HeadSpec {
    std::string name; // also the parameter prefix and learning-rate group
    nn::Sequential net;
    nn::LossKind pred_loss;
    bool has_consistency = false;
    nn::LossKind cons_loss = nn::LossKind::MSE;
    TargetKind target;
};

// A shared encoder feeding independent heads. Learning rates are grouped by
// parameter prefix ("enc" plus one group per head).
struct Model {
    ModelKind kind;
    std::size_t input_width = 0;
    std::vector<std::size_t> encoder_dims; // input, ~1/2, ~1/4
    nn::Sequential encoder;
    std::vector<HeadSpec> heads;
    std::unordered_map<std::string, double> group_lr;
    // Coordinate scaling range forced by the position head's output activation.
    double coord_lo = 0.0, coord_hi = 1.0;

    std::size_t param_count() const;
    const HeadSpec& head(const std::string& name) const;
};

Model build_simo(std::size_t input_width);
Model build_cnnloc(std::size_t input_width);
Model build_model(ModelKind kind, std::size_t input_width);

// Coordinate target range implied by the position head's output activation,
// available without building the model.
std::pair<double, double> coord_range(ModelKind kind);

nn::Parameters init_params(const Model& m, std::uint64_t seed);

// Per-tensor effective learning rate: group base rate times a global scale
// (the plateau scheduler moves scale, never the base rates).
std::unordered_map<std::string, double> lr_by_tensor(const Model& m, const nn::Parameters& params,
                                                     double scale);

struct ForwardResult {
    Matrix encoded;
    std::vector<Matrix> head_out; // aligned with m.heads
    nn::Cache enc_cache;
    std::vector<nn::Cache> head_cache;
    bool cached = false;
};

// Evaluates the encoder once and every head on top of it.
ForwardResult forward_all(const Model& m, const nn::Parameters& params, const Matrix& x,
                          nn::Mode mode, std::uint64_t dropout_seed, bool want_cache);

std::vector<Matrix> multi_head_forward(const Model& m, const nn::Parameters& params,
                                       const Matrix& x, nn::Mode mode,
                                       std::uint64_t dropout_seed = 0);

// Backpropagates per-head output gradients through heads and encoder,
// accumulating into grads (encoder receives the sum of head input gradients).
void backward_all(const Model& m, const nn::Parameters& params, const ForwardResult& fwd,
                  const std::vector<Matrix>& d_heads, nn::Parameters& grads);

// Target slice for one head from an encoded batch.
Matrix head_targets(const HeadSpec& head, const EncodedBatch& batch);

// Reconstruction pre-training of the encoder: a mirrored dense decoder is
// appended, the autoencoder is trained with MSE on the features, and the
// decoder is discarded. Encoder tensors in `params` are updated in place.
void sae_pretrain(const Model& m, nn::Parameters& params, const Matrix& features,
                  std::size_t epochs, std::size_t batch_size, std::uint64_t seed);

// JSON round-trip for the checkpoint footer. Deserialization rebuilds the
// architecture from kind + input width and verifies the head wiring matches.
std::string spec_json(const Model& m);
Model model_from_json(const std::string& json_text);

} // namespace mtwf::models
