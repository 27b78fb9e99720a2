#include "mtwf/models.hpp"

#include "doctest.h"
#include "json.hpp"

#include <string>
#include <vector>

using namespace mtwf;
using models::Model;
using models::ModelKind;

TEST_CASE("model kind names round-trip") {
    CHECK(models::kind_name(ModelKind::SimoDnn) == std::string("simo"));
    CHECK(models::kind_name(ModelKind::CnnLoc) == std::string("cnnloc"));
    CHECK(models::kind_from_name("simo") == ModelKind::SimoDnn);
    CHECK(models::kind_from_name("cnnloc") == ModelKind::CnnLoc);
    CHECK_THROWS_AS(models::kind_from_name("mlp"), DataError);
}

TEST_CASE("encoder halves twice with floor division") {
    Model simo = models::build_simo(428);
    CHECK(simo.encoder_dims == std::vector<std::size_t>{428, 214, 107});
    CHECK(simo.encoder.output_width() == 107);

    Model cnn = models::build_cnnloc(520);
    CHECK(cnn.encoder_dims == std::vector<std::size_t>{520, 260, 130});
    CHECK(cnn.encoder.output_width() == 130);

    CHECK_THROWS_AS(models::build_simo(3), DataError); // 3/4 == 0
}

TEST_CASE("simo heads expose the documented widths and losses") {
    Model m = models::build_simo(428);
    REQUIRE(m.heads.size() == 2);
    const auto& bf = m.head("BF");
    CHECK(bf.net.output_width() == 8);
    CHECK(bf.pred_loss == nn::LossKind::BCE);
    CHECK(bf.has_consistency);
    CHECK(bf.cons_loss == nn::LossKind::BCE);
    const auto& l = m.head("L");
    CHECK(l.net.output_width() == 2);
    CHECK(l.pred_loss == nn::LossKind::MSE);
    CHECK(l.has_consistency);
    CHECK(m.coord_lo == -1.0);
    CHECK(m.coord_hi == 1.0);
    CHECK_THROWS_AS(m.head("Z"), TrainError);
}

TEST_CASE("cnnloc heads expose the documented widths and losses") {
    Model m = models::build_cnnloc(428);
    REQUIRE(m.heads.size() == 3);
    CHECK(m.head("B").net.output_width() == 3);
    CHECK(m.head("B").pred_loss == nn::LossKind::CE);
    CHECK_FALSE(m.head("B").has_consistency); // classifier head trains supervised only
    CHECK(m.head("F").net.output_width() == 5);
    CHECK(m.head("F").pred_loss == nn::LossKind::CE);
    CHECK(m.head("F").cons_loss == nn::LossKind::MSE);
    CHECK(m.head("L").net.output_width() == 2);
    CHECK(m.head("L").pred_loss == nn::LossKind::MSE);
    CHECK(m.coord_lo == 0.0);
    CHECK(m.coord_hi == 1.0);
}

TEST_CASE("convolution stack flatten width is 33*(enc_out-63)") {
    Model m428 = models::build_cnnloc(428); // enc_out 107
    const auto& f_layers = m428.head("F").net.layers();
    REQUIRE(f_layers.size() == 10); // dropout, 3x(conv+elu), flatten, dense, softmax
    CHECK(f_layers[8].in == 33 * (107 - 63));
    CHECK(f_layers[8].in == 1452);
    const auto& l_layers = m428.head("L").net.layers();
    REQUIRE(l_layers.size() == 8); // no dropout, no softmax
    CHECK(l_layers[7].in == 1452);
    CHECK(l_layers[7].out == 2);

    Model m520 = models::build_cnnloc(520); // enc_out 130
    CHECK(m520.head("F").net.layers()[8].in == 33 * (130 - 63));
    CHECK(m520.head("F").net.layers()[8].in == 2211);
}

TEST_CASE("cnnloc needs an encoder output longer than the stacked kernels") {
    CHECK_THROWS_AS(models::build_cnnloc(264), DataError); // enc_out 66
    CHECK_NOTHROW(models::build_cnnloc(268));              // enc_out 67
}

TEST_CASE("coord_range matches the built model") {
    auto [slo, shi] = models::coord_range(ModelKind::SimoDnn);
    CHECK(slo == -1.0);
    CHECK(shi == 1.0);
    auto [clo, chi] = models::coord_range(ModelKind::CnnLoc);
    CHECK(clo == 0.0);
    CHECK(chi == 1.0);
}

TEST_CASE("param_count sums encoder and heads") {
    Model m = models::build_simo(16); // enc 16 -> 8 -> 4
    std::size_t enc = 16 * 8 + 8 + 8 * 4 + 4;
    std::size_t bf = 4 * 520 + 520 + 520 * 520 + 520 + 520 * 8 + 8;
    std::size_t l = 4 * 520 + 520 + 2 * (520 * 520 + 520) + 520 * 2 + 2;
    CHECK(m.param_count() == enc + bf + l);
    CHECK(m.encoder.param_count() == enc);

    nn::Parameters p = models::init_params(m, 1);
    CHECK(p.total_values() == m.param_count());
}

TEST_CASE("init_params is seed-deterministic and orders encoder before heads") {
    Model m = models::build_simo(16);
    nn::Parameters a = models::init_params(m, 5);
    nn::Parameters b = models::init_params(m, 5);
    nn::Parameters c = models::init_params(m, 6);
    CHECK(a.value_hash() == b.value_hash());
    CHECK(a.value_hash() != c.value_hash());
    REQUIRE(a.names().size() >= 4);
    CHECK(a.names()[0] == "enc.0.w");
    CHECK(a.names()[1] == "enc.0.b");
    CHECK(a.names()[2] == "enc.2.w");
    CHECK(a.names()[3] == "enc.2.b");
    CHECK(a.names()[4] == "BF.0.w"); // heads follow in declaration order
}

TEST_CASE("lr_by_tensor applies group rates scaled globally") {
    Model m = models::build_simo(16);
    nn::Parameters p = models::init_params(m, 2);
    auto lrs = models::lr_by_tensor(m, p, 0.75);
    CHECK(lrs.at("enc.0.w") == doctest::Approx(0.0001 * 0.75));
    CHECK(lrs.at("BF.4.b") == doctest::Approx(0.0001 * 0.75));
    CHECK(lrs.at("L.6.w") == doctest::Approx(0.001 * 0.75));
    CHECK(lrs.size() == p.names().size());

    nn::Parameters rogue;
    rogue.add("zz.0.w", {1});
    CHECK_THROWS_AS(models::lr_by_tensor(m, rogue, 1.0), TrainError);
}

TEST_CASE("simo forward produces range-consistent head outputs") {
    Model m = models::build_simo(16);
    nn::Parameters p = models::init_params(m, 3);
    Matrix x(2, 16);
    Xoshiro256ss rng(4);
    for (auto& v : x.v) v = rng.next_unit();

    auto outs = models::multi_head_forward(m, p, x, nn::Mode::Eval);
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].rows == 2);
    CHECK(outs[0].cols == 8);
    CHECK(outs[1].cols == 2);
    for (double v : outs[0].v) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    for (double v : outs[1].v) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("cnnloc forward produces calibrated classifier rows") {
    Model m = models::build_cnnloc(268);
    nn::Parameters p = models::init_params(m, 7);
    Matrix x(2, 268);
    Xoshiro256ss rng(8);
    for (auto& v : x.v) v = rng.next_unit();

    auto outs = models::multi_head_forward(m, p, x, nn::Mode::Eval);
    REQUIRE(outs.size() == 3);
    CHECK(outs[0].cols == 3);
    CHECK(outs[1].cols == 5);
    CHECK(outs[2].cols == 2);
    for (const Matrix* probs : {&outs[0], &outs[1]}) {
        for (std::size_t r = 0; r < probs->rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < probs->cols; ++c) s += probs->at(r, c);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward_all is deterministic in eval mode and matches multi_head_forward") {
    Model m = models::build_simo(16);
    nn::Parameters p = models::init_params(m, 9);
    Matrix x(3, 16);
    Xoshiro256ss rng(10);
    for (auto& v : x.v) v = rng.next_unit();

    auto full = models::forward_all(m, p, x, nn::Mode::Eval, 0, true);
    auto outs = models::multi_head_forward(m, p, x, nn::Mode::Eval, 0);
    REQUIRE(full.head_out.size() == outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i)
        CHECK(full.head_out[i].v == outs[i].v);
    CHECK(full.cached);
    CHECK(full.enc_cache.valid);
}

TEST_CASE("backward_all skips heads with empty gradients") {
    Model m = models::build_simo(16);
    nn::Parameters p = models::init_params(m, 11);
    Matrix x(3, 16);
    Xoshiro256ss rng(12);
    for (auto& v : x.v) v = rng.next_unit();

    auto fwd = models::forward_all(m, p, x, nn::Mode::Train, 1, true);
    std::vector<Matrix> d_heads(2);
    d_heads[1] = Matrix(3, 2);
    for (auto& v : d_heads[1].v) v = 0.5;

    nn::Parameters grads;
    models::backward_all(m, p, fwd, d_heads, grads);
    CHECK(grads.has("L.0.w"));
    CHECK(grads.has("enc.0.w"));
    CHECK_FALSE(grads.has("BF.0.w")); // its gradient slot stayed empty

    std::vector<Matrix> wrong_count(1);
    CHECK_THROWS_AS(models::backward_all(m, p, fwd, wrong_count, grads), TrainError);

    auto uncached = models::forward_all(m, p, x, nn::Mode::Train, 1, false);
    CHECK_THROWS_AS(models::backward_all(m, p, uncached, d_heads, grads), TrainError);
}

TEST_CASE("head_targets slices the one-hot block by head kind") {
    EncodedBatch batch;
    batch.has_targets = true;
    batch.bf_targets = Matrix(2, 8);
    for (std::size_t i = 0; i < batch.bf_targets.v.size(); ++i)
        batch.bf_targets.v[i] = double(i);
    batch.coord_targets = Matrix(2, 2);
    batch.coord_targets.v = {0.1, 0.2, 0.3, 0.4};

    Model cnn = models::build_cnnloc(268);
    Matrix b = models::head_targets(cnn.head("B"), batch);
    CHECK(b.cols == 3);
    CHECK(b.at(0, 0) == 0.0);
    CHECK(b.at(1, 2) == 10.0);
    Matrix f = models::head_targets(cnn.head("F"), batch);
    CHECK(f.cols == 5);
    CHECK(f.at(0, 0) == 3.0); // floor block starts after the 3 building columns
    CHECK(f.at(1, 4) == 15.0);
    Matrix l = models::head_targets(cnn.head("L"), batch);
    CHECK(l.v == batch.coord_targets.v);

    Model simo = models::build_simo(16);
    Matrix bf = models::head_targets(simo.head("BF"), batch);
    CHECK(bf.v == batch.bf_targets.v);

    EncodedBatch unlabeled;
    unlabeled.has_targets = false;
    CHECK_THROWS_AS(models::head_targets(simo.head("BF"), unlabeled), TrainError);
}

TEST_CASE("sae_pretrain trains encoder tensors only, deterministically") {
    Model m = models::build_simo(16);
    Matrix feats(8, 16);
    Xoshiro256ss rng(13);
    for (auto& v : feats.v) v = rng.next_unit();

    nn::Parameters p = models::init_params(m, 1);
    std::vector<double> enc_w_before = p.get("enc.0.w").v;
    std::vector<double> bf_w_before = p.get("BF.0.w").v;
    std::vector<double> l_w_before = p.get("L.0.w").v;

    models::sae_pretrain(m, p, feats, 2, 4, 99);
    CHECK(p.get("enc.0.w").v != enc_w_before);
    CHECK(p.get("BF.0.w").v == bf_w_before); // heads untouched by reconstruction
    CHECK(p.get("L.0.w").v == l_w_before);

    nn::Parameters q = models::init_params(m, 1);
    models::sae_pretrain(m, q, feats, 2, 4, 99);
    CHECK(q.value_hash() == p.value_hash());

    nn::Parameters r = models::init_params(m, 1);
    models::sae_pretrain(m, r, feats, 2, 4, 100);
    CHECK(r.value_hash() != p.value_hash());
}

TEST_CASE("sae_pretrain degenerate arguments") {
    Model m = models::build_simo(16);
    Matrix feats(8, 16);
    for (auto& v : feats.v) v = 0.25;

    nn::Parameters p = models::init_params(m, 1);
    std::uint64_t before = p.value_hash();
    models::sae_pretrain(m, p, feats, 0, 4, 1); // zero epochs: no-op
    CHECK(p.value_hash() == before);

    Matrix empty(0, 16);
    models::sae_pretrain(m, p, empty, 3, 4, 1); // no rows: no-op
    CHECK(p.value_hash() == before);

    CHECK_THROWS_AS(models::sae_pretrain(m, p, feats, 1, 0, 1), TrainError);
}

TEST_CASE("spec_json round-trips through model_from_json") {
    Model m = models::build_cnnloc(268);
    std::string js = models::spec_json(m);
    Model back = models::model_from_json(js);
    CHECK(back.kind == m.kind);
    CHECK(back.input_width == m.input_width);
    CHECK(back.encoder_dims == m.encoder_dims);
    REQUIRE(back.heads.size() == m.heads.size());
    for (std::size_t i = 0; i < m.heads.size(); ++i) {
        CHECK(back.heads[i].name == m.heads[i].name);
        CHECK(back.heads[i].net.output_width() == m.heads[i].net.output_width());
    }
    CHECK(models::spec_json(back) == js);
}

TEST_CASE("model_from_json rejects malformed or inconsistent specs") {
    CHECK_THROWS_AS(models::model_from_json("not json at all"), DataError);
    CHECK_THROWS_AS(models::model_from_json("{}"), DataError);

    std::string js = models::spec_json(models::build_simo(428));
    auto j = nlohmann::json::parse(js);

    auto bad_dims = j;
    bad_dims["encoder_dims"][1] = 999;
    CHECK_THROWS_AS(models::model_from_json(bad_dims.dump()), DataError);

    auto bad_head = j;
    bad_head["heads"][0]["name"] = "XX";
    CHECK_THROWS_AS(models::model_from_json(bad_head.dump()), DataError);

    auto missing_head = j;
    missing_head["heads"].erase(1);
    CHECK_THROWS_AS(models::model_from_json(missing_head.dump()), DataError);
}
