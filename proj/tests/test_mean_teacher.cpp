#include "mtwf/mean_teacher.hpp"

#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

using namespace mtwf;

namespace {

// Hand-built labeled batch for a width-12 SIMO model: one-hot building/floor
// block plus coordinates already in the tanh range.
EncodedBatch make_batch(std::size_t n, std::uint64_t seed) {
    EncodedBatch b;
    b.has_targets = true;
    b.features = Matrix(n, 12);
    Xoshiro256ss rng(seed);
    for (auto& v : b.features.v) v = rng.next_unit();
    b.bf_targets = Matrix(n, 8);
    b.coord_targets = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        b.bf_targets.at(i, i % 3) = 1.0;
        b.bf_targets.at(i, 3 + i % 5) = 1.0;
        b.coord_targets.at(i, 0) = rng.uniform(-1.0, 1.0);
        b.coord_targets.at(i, 1) = rng.uniform(-1.0, 1.0);
    }
    return b;
}

Matrix make_unlabeled(std::size_t n, std::uint64_t seed) {
    Matrix u(n, 12);
    Xoshiro256ss rng(seed);
    for (auto& v : u.v) v = rng.next_unit();
    return u;
}

double supervised_loss(const models::Model& m, const nn::Parameters& p, const EncodedBatch& b) {
    auto outs = models::multi_head_forward(m, p, b.features, nn::Mode::Eval);
    double total = 0.0;
    for (std::size_t i = 0; i < m.heads.size(); ++i) {
        Matrix target = models::head_targets(m.heads[i], b);
        total += nn::loss_eval(m.heads[i].pred_loss, outs[i], target).value;
    }
    return total;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("ssl config validation") {
    mt::SslConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.alpha = 1.0;
    CHECK_NOTHROW(cfg.validate()); // frozen teacher is allowed

    mt::SslConfig bad = cfg;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), TrainError);
    bad = cfg;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), TrainError);
    bad = cfg;
    bad.wc = -0.5;
    CHECK_THROWS_AS(bad.validate(), TrainError);
    bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), TrainError);
    bad = cfg;
    bad.scheduler_patience = -1;
    CHECK_THROWS_AS(bad.validate(), TrainError);
}

TEST_CASE("clone yields equal but independent student and teacher") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_p = models::init_params(m, 1);
    mt::ClonePair pair = mt::clone(theta_p);
    CHECK(pair.student.value_hash() == theta_p.value_hash());
    CHECK(pair.teacher.value_hash() == theta_p.value_hash());

    pair.student.get("enc.0.w").v[0] += 1.0;
    CHECK(pair.teacher.value_hash() == theta_p.value_hash()); // deep copies
}

TEST_CASE("ssl_step satisfies the total-loss and ema identities exactly") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_p = models::init_params(m, 2);
    mt::ClonePair pair = mt::clone(theta_p);
    nn::Parameters teacher_before = pair.teacher;

    EncodedBatch lb = make_batch(4, 3);
    Matrix ub = make_unlabeled(5, 4);
    mt::SslConfig cfg;
    cfg.wc = 6.0;
    cfg.alpha = 0.999;

    nn::AdamState opt;
    mt::LossBreakdown lo = mt::ssl_step(m, pair.student, pair.teacher, lb, ub, cfg, opt, 1.0, 77);

    CHECK(lo.lt == lo.ld + cfg.wc * lo.lc); // exact, not approximate
    CHECK(lo.ld > 0.0);

    // teacher_after = alpha*teacher_before + (1-alpha)*student_after, exactly.
    std::size_t mismatches = 0;
    for (const auto& name : pair.teacher.names()) {
        const auto& t_after = pair.teacher.get(name).v;
        const auto& t_before = teacher_before.get(name).v;
        const auto& s_after = pair.student.get(name).v;
        for (std::size_t i = 0; i < t_after.size(); ++i) {
            double expected = cfg.alpha * t_before[i] + (1.0 - cfg.alpha) * s_after[i];
            if (t_after[i] != expected) ++mismatches;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("consistency gradients vanish on a fresh clone") {
    // Student and teacher start identical and SIMO has no dropout, so the
    // first consistency pass compares a prediction with itself: both MSE and
    // BCE then have zero gradient and the update must equal a supervised one.
    models::Model m = models::build_simo(12);
    nn::Parameters theta_p = models::init_params(m, 5);
    EncodedBatch lb = make_batch(4, 6);
    Matrix ub = make_unlabeled(5, 7);

    mt::SslConfig with_c;
    with_c.wc = 6.0;
    mt::SslConfig without_c = with_c;
    without_c.wc = 0.0;

    mt::ClonePair a = mt::clone(theta_p);
    nn::AdamState opt_a;
    mt::LossBreakdown lo = mt::ssl_step(m, a.student, a.teacher, lb, ub, with_c, opt_a, 1.0, 9);

    mt::ClonePair b = mt::clone(theta_p);
    nn::AdamState opt_b;
    mt::ssl_step(m, b.student, b.teacher, lb, ub, without_c, opt_b, 1.0, 9);

    CHECK(lo.lc > 0.0); // the BCE consistency term is the teacher's own entropy
    for (const auto& name : a.student.names()) {
        const auto& va = a.student.get(name).v;
        const auto& vb = b.student.get(name).v;
        REQUIRE(va == vb);
    }
}

TEST_CASE("wc=0 makes the step independent of the unlabeled batch") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_p = models::init_params(m, 8);
    EncodedBatch lb = make_batch(4, 9);
    mt::SslConfig cfg;
    cfg.wc = 0.0;

    mt::ClonePair a = mt::clone(theta_p);
    nn::AdamState opt_a;
    mt::LossBreakdown lo_a =
        mt::ssl_step(m, a.student, a.teacher, lb, make_unlabeled(5, 10), cfg, opt_a, 1.0, 3);

    mt::ClonePair b = mt::clone(theta_p);
    nn::AdamState opt_b;
    mt::LossBreakdown lo_b =
        mt::ssl_step(m, b.student, b.teacher, lb, make_unlabeled(5, 999), cfg, opt_b, 1.0, 3);

    CHECK(lo_a.lc == 0.0);
    CHECK(lo_a.lt == lo_a.ld);
    CHECK(lo_a.ld == lo_b.ld);
    CHECK(a.student.value_hash() == b.student.value_hash());
    CHECK(a.teacher.value_hash() == b.teacher.value_hash());
}

TEST_CASE("alpha=1 freezes the teacher") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_p = models::init_params(m, 11);
    mt::ClonePair pair = mt::clone(theta_p);
    mt::SslConfig cfg;
    cfg.alpha = 1.0;
    cfg.wc = 6.0;

    nn::AdamState opt;
    mt::ssl_step(m, pair.student, pair.teacher, make_batch(4, 12), make_unlabeled(4, 13), cfg,
                 opt, 1.0, 5);

    CHECK(pair.student.value_hash() != theta_p.value_hash()); // student moved
    for (const auto& name : pair.teacher.names()) {
        const auto& t = pair.teacher.get(name).v;
        const auto& p0 = theta_p.get(name).v;
        REQUIRE(t == p0);
    }
}

TEST_CASE("pretrain reduces the supervised loss and logs one row per epoch") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_0 = models::init_params(m, 14);
    EncodedBatch labeled = make_batch(12, 15);

    mt::SslConfig cfg;
    cfg.batch_size = 4;
    cfg.pretrain_max_epochs = 3;
    cfg.seed = 21;

    double before = supervised_loss(m, theta_0, labeled);
    std::ostringstream log;
    nn::Parameters trained = mt::pretrain(m, theta_0, labeled, cfg, &log);
    double after = supervised_loss(m, trained, labeled);
    CHECK(after < before);

    auto rows = lines_of(log.str());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "epoch,ld,lc,lt,lr,gamma_dev");
    CHECK(rows[1].substr(0, 2) == "1,");
    CHECK(rows[3].substr(0, 2) == "3,");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].back() == ','); // no probe: gamma column stays empty
        auto first = rows[i].find(',');
        auto second = rows[i].find(',', first + 1);
        double ld = std::stod(rows[i].substr(first + 1, second - first - 1));
        CHECK(std::isfinite(ld));
    }
}

TEST_CASE("pretrain with a probe logs gamma values") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_0 = models::init_params(m, 30);
    EncodedBatch labeled = make_batch(8, 31);

    mt::SslConfig cfg;
    cfg.batch_size = 4;
    cfg.pretrain_max_epochs = 2;

    int calls = 0;
    mt::GammaProbe probe = [&](const nn::Parameters&) {
        ++calls;
        return 0.25;
    };
    std::ostringstream log;
    mt::pretrain(m, theta_0, labeled, cfg, &log, &probe);
    CHECK(calls == 2);
    auto rows = lines_of(log.str());
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].substr(rows[1].rfind(',') + 1) == "0.25");
}

TEST_CASE("pretrain with zero epochs returns the input untouched") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_0 = models::init_params(m, 16);
    std::uint64_t h0 = theta_0.value_hash();
    EncodedBatch labeled = make_batch(8, 17);

    mt::SslConfig cfg;
    cfg.pretrain_max_epochs = 0;
    std::ostringstream log;
    nn::Parameters out = mt::pretrain(m, theta_0, labeled, cfg, &log);
    CHECK(out.value_hash() == h0);
    CHECK(log.str() == "epoch,ld,lc,lt,lr,gamma_dev\n");
}

TEST_CASE("pretrain wraps divergence errors with the failing epoch") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_0 = models::init_params(m, 18);
    EncodedBatch labeled = make_batch(8, 19);
    labeled.features.at(0, 0) = std::nan("");

    mt::SslConfig cfg;
    cfg.batch_size = 8;
    cfg.pretrain_max_epochs = 2;
    CHECK_THROWS_WITH_AS(mt::pretrain(m, theta_0, labeled, cfg),
                         doctest::Contains("[pretrain epoch 1]"), TrainError);
}

TEST_CASE("pretrain requires labeled rows") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_0 = models::init_params(m, 20);
    EncodedBatch unlabeled;
    unlabeled.has_targets = false;
    unlabeled.features = Matrix(4, 12);
    mt::SslConfig cfg;
    CHECK_THROWS_AS(mt::pretrain(m, theta_0, unlabeled, cfg), TrainError);
}

TEST_CASE("ssl_train returns the best teacher deterministically") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_p = models::init_params(m, 22);
    EncodedBatch labeled = make_batch(8, 23);
    Matrix unlabeled = make_unlabeled(6, 24);

    mt::SslConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 2;
    cfg.wc = 6.0;
    cfg.seed = 25;

    std::ostringstream log_a;
    nn::Parameters teacher_a = mt::ssl_train(m, theta_p, labeled, unlabeled, cfg, &log_a);
    std::ostringstream log_b;
    nn::Parameters teacher_b = mt::ssl_train(m, theta_p, labeled, unlabeled, cfg, &log_b);

    CHECK(teacher_a.value_hash() == teacher_b.value_hash());
    CHECK(log_a.str() == log_b.str());
    CHECK(teacher_a.value_hash() != theta_p.value_hash());

    auto rows = lines_of(log_a.str());
    REQUIRE(rows.size() == 3); // header + one row per epoch
    CHECK(rows[0] == "epoch,ld,lc,lt,lr,gamma_dev");
}

TEST_CASE("ssl_train validates its inputs") {
    models::Model m = models::build_simo(12);
    nn::Parameters theta_p = models::init_params(m, 26);
    EncodedBatch labeled = make_batch(8, 27);
    mt::SslConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 1;

    Matrix no_rows(0, 12);
    CHECK_THROWS_AS(mt::ssl_train(m, theta_p, labeled, no_rows, cfg), TrainError);

    Matrix bad_width(4, 7);
    CHECK_THROWS_WITH_AS(mt::ssl_train(m, theta_p, labeled, bad_width, cfg),
                         doctest::Contains("[ssl epoch 1]"), TrainError);

    EncodedBatch unlabeled_only;
    unlabeled_only.has_targets = false;
    unlabeled_only.features = Matrix(4, 12);
    CHECK_THROWS_AS(mt::ssl_train(m, theta_p, unlabeled_only, make_unlabeled(4, 29), cfg),
                    TrainError);
}
