#include "mtwf/models.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace mtwf::models {

using nn::Activation;
using nn::LayerSpec;
using nn::LossKind;

const char* kind_name(ModelKind k) {
    return k == ModelKind::SimoDnn ? "simo" : "cnnloc";
}

ModelKind kind_from_name(const std::string& s) {
    if (s == "simo") return ModelKind::SimoDnn;
    if (s == "cnnloc") return ModelKind::CnnLoc;
    throw DataError("unknown model kind: " + s);
}

std::size_t Model::param_count() const {
    std::size_t n = encoder.param_count();
    for (const auto& h : heads) n += h.net.param_count();
    return n;
}

const HeadSpec& Model::head(const std::string& name) const {
    for (const auto& h : heads)
        if (h.name == name) return h;
    throw TrainError("model has no head named " + name);
}

namespace {

// Halving chain w -> floor(w/2) -> floor(w/4), ELU between dense layers.
nn::Sequential make_encoder(std::size_t input_width) {
    std::size_t h1 = input_width / 2;
    std::size_t h2 = input_width / 4;
    if (h2 == 0)
        throw DataError("input width too small for encoder halving chain");
    return nn::Sequential("enc", input_width,
                          {LayerSpec::dense(input_width, h1), LayerSpec::activation(Activation::Elu),
                           LayerSpec::dense(h1, h2), LayerSpec::activation(Activation::Elu)});
}

std::vector<LayerSpec> conv_stack(std::size_t enc_out, std::size_t tail_out, bool with_dropout) {
    // Three valid kernel-22 convolutions shrink the length by 63; the flatten
    // width is therefore 33*(enc_out - 63).
    if (enc_out <= 66)
        throw DataError("encoder output too short for the convolution stack (needs > 66)");
    std::size_t flat = 33 * (enc_out - 63);
    std::vector<LayerSpec> ls;
    if (with_dropout) ls.push_back(LayerSpec::dropout(0.5));
    ls.push_back(LayerSpec::conv1d(1, 99, 22));
    ls.push_back(LayerSpec::activation(Activation::Elu));
    ls.push_back(LayerSpec::conv1d(99, 66, 22));
    ls.push_back(LayerSpec::activation(Activation::Elu));
    ls.push_back(LayerSpec::conv1d(66, 33, 22));
    ls.push_back(LayerSpec::activation(Activation::Elu));
    ls.push_back(LayerSpec::flatten());
    ls.push_back(LayerSpec::dense(flat, tail_out));
    return ls;
}

} // namespace

Model build_simo(std::size_t input_width) {
    Model m;
    m.kind = ModelKind::SimoDnn;
    m.input_width = input_width;
    m.encoder = make_encoder(input_width);
    m.encoder_dims = {input_width, input_width / 2, input_width / 4};
    std::size_t enc_out = m.encoder.output_width();

    HeadSpec bf;
    bf.name = "BF";
    bf.net = nn::Sequential("BF", enc_out,
                            {LayerSpec::dense(enc_out, 520), LayerSpec::activation(Activation::Elu),
                             LayerSpec::dense(520, 520), LayerSpec::activation(Activation::Elu),
                             LayerSpec::dense(520, 8), LayerSpec::activation(Activation::Sigmoid)});
    bf.pred_loss = LossKind::BCE;
    bf.has_consistency = true;
    bf.cons_loss = LossKind::BCE;
    bf.target = TargetKind::BuildingFloor8;
    m.heads.push_back(std::move(bf));

    HeadSpec l;
    l.name = "L";
    l.net = nn::Sequential("L", enc_out,
                           {LayerSpec::dense(enc_out, 520), LayerSpec::activation(Activation::Tanh),
                            LayerSpec::dense(520, 520), LayerSpec::activation(Activation::Tanh),
                            LayerSpec::dense(520, 520), LayerSpec::activation(Activation::Tanh),
                            LayerSpec::dense(520, 2), LayerSpec::activation(Activation::Tanh)});
    l.pred_loss = LossKind::MSE;
    l.has_consistency = true;
    l.cons_loss = LossKind::MSE;
    l.target = TargetKind::Coords2;
    m.heads.push_back(std::move(l));

    m.group_lr = {{"enc", 0.0001}, {"BF", 0.0001}, {"L", 0.001}};
    m.coord_lo = -1.0; // Tanh output range
    m.coord_hi = 1.0;
    return m;
}

Model build_cnnloc(std::size_t input_width) {
    Model m;
    m.kind = ModelKind::CnnLoc;
    m.input_width = input_width;
    m.encoder = make_encoder(input_width);
    m.encoder_dims = {input_width, input_width / 2, input_width / 4};
    std::size_t enc_out = m.encoder.output_width();

    HeadSpec b;
    b.name = "B";
    b.net = nn::Sequential("B", enc_out,
                           {LayerSpec::dense(enc_out, 107), LayerSpec::activation(Activation::Elu),
                            LayerSpec::dense(107, 107), LayerSpec::activation(Activation::Elu),
                            LayerSpec::dense(107, 3), LayerSpec::activation(Activation::Softmax)});
    b.pred_loss = LossKind::CE;
    b.has_consistency = false; // single-loss head
    b.target = TargetKind::Building3;
    m.heads.push_back(std::move(b));

    HeadSpec f;
    f.name = "F";
    auto f_layers = conv_stack(enc_out, 5, /*with_dropout=*/true);
    f_layers.push_back(LayerSpec::activation(Activation::Softmax));
    f.net = nn::Sequential("F", enc_out, std::move(f_layers));
    f.pred_loss = LossKind::CE;
    f.has_consistency = true;
    f.cons_loss = LossKind::MSE; // between softmax probability vectors
    f.target = TargetKind::Floor5;
    m.heads.push_back(std::move(f));

    HeadSpec l;
    l.name = "L";
    l.net = nn::Sequential("L", enc_out, conv_stack(enc_out, 2, /*with_dropout=*/false));
    l.pred_loss = LossKind::MSE;
    l.has_consistency = true;
    l.cons_loss = LossKind::MSE;
    l.target = TargetKind::Coords2;
    m.heads.push_back(std::move(l));

    m.group_lr = {{"enc", 0.0001}, {"B", 0.0001}, {"F", 0.0001}, {"L", 0.0001}};
    m.coord_lo = 0.0; // linear output, unit-box convention
    m.coord_hi = 1.0;
    return m;
}

Model build_model(ModelKind kind, std::size_t input_width) {
    return kind == ModelKind::SimoDnn ? build_simo(input_width) : build_cnnloc(input_width);
}

std::pair<double, double> coord_range(ModelKind kind) {
    return kind == ModelKind::SimoDnn ? std::pair{-1.0, 1.0} : std::pair{0.0, 1.0};
}

nn::Parameters init_params(const Model& m, std::uint64_t seed) {
    nn::Parameters params;
    Xoshiro256ss rng(seed);
    m.encoder.init_params(params, rng);
    for (const auto& h : m.heads)
        h.net.init_params(params, rng);
    return params;
}

std::unordered_map<std::string, double> lr_by_tensor(const Model& m, const nn::Parameters& params,
                                                     double scale) {
    std::unordered_map<std::string, double> out;
    for (const auto& name : params.names()) {
        auto dot = name.find('.');
        std::string group = dot == std::string::npos ? name : name.substr(0, dot);
        auto it = m.group_lr.find(group);
        if (it == m.group_lr.end())
            throw TrainError("no learning-rate group for tensor " + name);
        out.emplace(name, it->second * scale);
    }
    return out;
}

ForwardResult forward_all(const Model& m, const nn::Parameters& params, const Matrix& x,
                          nn::Mode mode, std::uint64_t dropout_seed, bool want_cache) {
    ForwardResult r;
    r.cached = want_cache;
    r.encoded = m.encoder.forward(params, x, mode, derive_seed(dropout_seed, 0),
                                  want_cache ? &r.enc_cache : nullptr);
    r.head_out.reserve(m.heads.size());
    if (want_cache) r.head_cache.resize(m.heads.size());
    for (std::size_t i = 0; i < m.heads.size(); ++i) {
        r.head_out.push_back(m.heads[i].net.forward(params, r.encoded, mode,
                                                    derive_seed(dropout_seed, i + 1),
                                                    want_cache ? &r.head_cache[i] : nullptr));
    }
    return r;
}

std::vector<Matrix> multi_head_forward(const Model& m, const nn::Parameters& params,
                                       const Matrix& x, nn::Mode mode,
                                       std::uint64_t dropout_seed) {
    return forward_all(m, params, x, mode, dropout_seed, false).head_out;
}

void backward_all(const Model& m, const nn::Parameters& params, const ForwardResult& fwd,
                  const std::vector<Matrix>& d_heads, nn::Parameters& grads) {
    if (!fwd.cached)
        throw TrainError("backward_all requires a cached forward pass");
    if (d_heads.size() != m.heads.size())
        throw TrainError("backward_all: gradient count does not match head count");

    Matrix d_enc(fwd.encoded.rows, fwd.encoded.cols);
    for (std::size_t i = 0; i < m.heads.size(); ++i) {
        if (d_heads[i].v.empty()) continue; // head not in play this pass
        Matrix dx = m.heads[i].net.backward(params, fwd.head_cache[i], d_heads[i], grads);
        for (std::size_t j = 0; j < d_enc.v.size(); ++j) d_enc.v[j] += dx.v[j];
    }
    m.encoder.backward(params, fwd.enc_cache, d_enc, grads);
}

Matrix head_targets(const HeadSpec& head, const EncodedBatch& batch) {
    if (!batch.has_targets)
        throw TrainError("head_targets on an unlabeled batch");
    switch (head.target) {
    case TargetKind::BuildingFloor8:
        return batch.bf_targets;
    case TargetKind::Building3: {
        Matrix t(batch.bf_targets.rows, 3);
        for (std::size_t r = 0; r < t.rows; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                t.at(r, c) = batch.bf_targets.at(r, c);
        return t;
    }
    case TargetKind::Floor5: {
        Matrix t(batch.bf_targets.rows, 5);
        for (std::size_t r = 0; r < t.rows; ++r)
            for (std::size_t c = 0; c < 5; ++c)
                t.at(r, c) = batch.bf_targets.at(r, 3 + c);
        return t;
    }
    case TargetKind::Coords2:
        return batch.coord_targets;
    }
    throw TrainError("unreachable head target kind");
}

void sae_pretrain(const Model& m, nn::Parameters& params, const Matrix& features,
                  std::size_t epochs, std::size_t batch_size, std::uint64_t seed) {
    if (epochs == 0 || features.rows == 0) return;
    if (batch_size == 0)
        throw TrainError("sae_pretrain: batch size must be positive");

    // Mirror the encoder: same prefix, so the shared dense layers keep their
    // parameter names and the trained values flow back by simple copy.
    std::size_t w = m.encoder_dims[0], h1 = m.encoder_dims[1], h2 = m.encoder_dims[2];
    nn::Sequential sae("enc", w,
                       {LayerSpec::dense(w, h1), LayerSpec::activation(Activation::Elu),
                        LayerSpec::dense(h1, h2), LayerSpec::activation(Activation::Elu),
                        LayerSpec::dense(h2, h1), LayerSpec::activation(Activation::Elu),
                        LayerSpec::dense(h1, w)});

    Xoshiro256ss init_rng(derive_seed(seed, 0x5ae));
    nn::Parameters sp;
    sae.init_params(sp, init_rng);
    for (const auto& name : sp.names())
        if (params.has(name))
            sp.get(name).v = params.get(name).v;

    double enc_lr = m.group_lr.at("enc");
    std::unordered_map<std::string, double> lrs;
    for (const auto& name : sp.names()) lrs.emplace(name, enc_lr);

    nn::AdamState opt;
    std::vector<std::size_t> order(features.rows);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        seeded_shuffle(order, derive_seed(seed, 0xe90c + epoch));
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t end = std::min(start + batch_size, order.size());
            Matrix xb(end - start, features.cols);
            for (std::size_t r = start; r < end; ++r)
                std::copy(features.row(order[r]), features.row(order[r]) + features.cols,
                          xb.row(r - start));
            nn::Cache cache;
            Matrix recon = sae.forward(sp, xb, nn::Mode::Train, derive_seed(seed, step), &cache);
            nn::LossValue lv = nn::loss_eval(nn::LossKind::MSE, recon, xb);
            nn::Parameters grads;
            sae.backward(sp, cache, lv.grad, grads);
            nn::adam_step(sp, grads, opt, lrs);
            ++step;
        }
    }

    for (const auto& name : params.names())
        if (sp.has(name))
            params.get(name).v = sp.get(name).v;
}

std::string spec_json(const Model& m) {
    nlohmann::json j;
    j["name"] = kind_name(m.kind);
    j["input_width"] = m.input_width;
    j["encoder_dims"] = m.encoder_dims;
    j["coord_range"] = {m.coord_lo, m.coord_hi};
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& h : m.heads) {
        nlohmann::json hj;
        hj["name"] = h.name;
        hj["output_width"] = h.net.output_width();
        hj["prediction_loss"] = nn::loss_name(h.pred_loss);
        if (h.has_consistency)
            hj["consistency_loss"] = nn::loss_name(h.cons_loss);
        heads.push_back(std::move(hj));
    }
    j["heads"] = std::move(heads);
    return j.dump();
}

Model model_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.contains("name") || !j.contains("input_width"))
        throw DataError("invalid model spec JSON");
    Model m = build_model(kind_from_name(j["name"].get<std::string>()),
                          j["input_width"].get<std::size_t>());
    // Cross-check the stored wiring against the rebuilt architecture.
    if (j.contains("encoder_dims") &&
        j["encoder_dims"].get<std::vector<std::size_t>>() != m.encoder_dims)
        throw DataError("model spec JSON disagrees with rebuilt encoder dims");
    if (j.contains("heads")) {
        const auto& hs = j["heads"];
        if (hs.size() != m.heads.size())
            throw DataError("model spec JSON disagrees with rebuilt head count");
        for (std::size_t i = 0; i < m.heads.size(); ++i) {
            if (hs[i]["name"].get<std::string>() != m.heads[i].name ||
                hs[i]["output_width"].get<std::size_t>() != m.heads[i].net.output_width())
                throw DataError("model spec JSON disagrees with rebuilt head wiring");
        }
    }
    return m;
}

} // namespace mtwf::models
