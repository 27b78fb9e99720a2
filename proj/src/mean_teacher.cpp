#include "mtwf/mean_teacher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

namespace mtwf::mt {

void SslConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw TrainError("ssl config: alpha must be in (0,1]");
    if (wc < 0.0)
        throw TrainError("ssl config: consistency weight must be >= 0");
    if (batch_size < 1)
        throw TrainError("ssl config: batch size must be >= 1");
    if (scheduler_patience < 0 || early_stop_patience < 0)
        throw TrainError("ssl config: patience must be >= 0");
}

namespace {

Matrix take_rows(const Matrix& src, const std::vector<std::size_t>& idx, std::size_t from,
                 std::size_t count) {
    Matrix out(count, src.cols);
    for (std::size_t r = 0; r < count; ++r)
        std::copy(src.row(idx[from + r]), src.row(idx[from + r]) + src.cols, out.row(r));
    return out;
}

EncodedBatch take_batch(const EncodedBatch& src,
                                    const std::vector<std::size_t>& idx, std::size_t from,
                                    std::size_t count) {
    EncodedBatch b;
    b.features = take_rows(src.features, idx, from, count);
    b.has_targets = src.has_targets;
    b.scaler = src.scaler;
    if (src.has_targets) {
        b.bf_targets = take_rows(src.bf_targets, idx, from, count);
        b.coord_targets = take_rows(src.coord_targets, idx, from, count);
    }
    return b;
}

// Index stream that deals batches and reshuffles whenever a pass completes.
struct CyclingStream {
    std::vector<std::size_t> order;
    std::size_t pos = 0;
    std::uint64_t seed = 0;
    std::uint64_t pass = 0;

    CyclingStream(std::size_t n, std::uint64_t seed_) : seed(seed_) {
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        reshuffle();
    }
    void reshuffle() {
        seeded_shuffle(order, derive_seed(seed, pass++));
        pos = 0;
    }
    std::vector<std::size_t> take(std::size_t k) {
        std::vector<std::size_t> out;
        out.reserve(k);
        while (out.size() < k) {
            if (pos == order.size()) reshuffle();
            std::size_t chunk = std::min(k - out.size(), order.size() - pos);
            out.insert(out.end(), order.begin() + std::ptrdiff_t(pos),
                       order.begin() + std::ptrdiff_t(pos + chunk));
            pos += chunk;
        }
        return out;
    }
};

double supervised_pass(const models::Model& m, const nn::Parameters& params,
                       const EncodedBatch& batch, nn::Mode mode,
                       std::uint64_t dropout_seed, nn::Parameters* grads) {
    models::ForwardResult fwd =
        models::forward_all(m, params, batch.features, mode, dropout_seed, grads != nullptr);
    double ld = 0.0;
    std::vector<Matrix> d_heads(m.heads.size());
    for (std::size_t i = 0; i < m.heads.size(); ++i) {
        Matrix target = models::head_targets(m.heads[i], batch);
        nn::LossValue lv = nn::loss_eval(m.heads[i].pred_loss, fwd.head_out[i], target);
        ld += lv.value;
        if (grads) d_heads[i] = std::move(lv.grad);
    }
    if (grads)
        models::backward_all(m, params, fwd, d_heads, *grads);
    return ld;
}

void log_row(std::ostream* log, std::size_t epoch, double ld, double lc, double lt,
             double lr, const std::optional<double>& gamma) {
    if (!log) return;
    *log << epoch << ',' << format_double(ld) << ',' << format_double(lc) << ','
         << format_double(lt) << ',' << format_double(lr);
    *log << ',';
    if (gamma) *log << format_double(*gamma);
    *log << '\n';
}

void log_header(std::ostream* log) {
    if (log) *log << "epoch,ld,lc,lt,lr,gamma_dev\n";
}

} // namespace

nn::Parameters pretrain(const models::Model& m, nn::Parameters params,
                        const EncodedBatch& labeled, const SslConfig& cfg,
                        std::ostream* log, const GammaProbe* probe) {
    cfg.validate();
    if (!labeled.has_targets || labeled.features.rows == 0)
        throw TrainError("pretrain: labeled data required");
    log_header(log);
    if (cfg.pretrain_max_epochs == 0) return params;

    const std::size_t n = labeled.features.rows;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    seeded_shuffle(idx, derive_seed(cfg.seed, 0x401d));
    const std::size_t holdout = n / 10;
    std::vector<std::size_t> dev(idx.begin(), idx.begin() + std::ptrdiff_t(holdout));
    std::vector<std::size_t> train(idx.begin() + std::ptrdiff_t(holdout), idx.end());

    EncodedBatch dev_batch;
    if (holdout > 0) dev_batch = take_batch(labeled, dev, 0, dev.size());

    nn::AdamState opt;
    nn::PlateauScheduler sched;
    sched.patience = cfg.scheduler_patience;
    nn::EarlyStopping stop;
    stop.patience = cfg.early_stop_patience;
    double lr_scale = 1.0;
    std::uint64_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.pretrain_max_epochs; ++epoch) {
        try {
            seeded_shuffle(train, derive_seed(cfg.seed, 0x9000 + epoch));
            double ld_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
                std::size_t count = std::min(cfg.batch_size, train.size() - start);
                EncodedBatch b = take_batch(labeled, train, start, count);
                nn::Parameters grads;
                double ld = supervised_pass(m, params, b, nn::Mode::Train,
                                            derive_seed(cfg.seed, 0xd0 + step), &grads);
                nn::adam_step(params, grads, opt, models::lr_by_tensor(m, params, lr_scale));
                ld_sum += ld;
                ++batches;
                ++step;
            }
            double train_mean = batches ? ld_sum / double(batches) : 0.0;
            double monitor = train_mean;
            if (holdout > 0)
                monitor = supervised_pass(m, params, dev_batch, nn::Mode::Eval, 0, nullptr);

            std::optional<double> gamma;
            if (probe && *probe) gamma = (*probe)(params);
            log_row(log, epoch, train_mean, 0.0, train_mean,
                    m.group_lr.at("enc") * lr_scale, gamma);

            if (sched.observe(train_mean)) lr_scale *= sched.factor;
            if (stop.observe(monitor)) break;
        } catch (const TrainError& e) {
            throw TrainError(std::string(e.what()) + " [pretrain epoch " +
                             std::to_string(epoch) + "]");
        }
    }
    return params;
}

ClonePair clone(const nn::Parameters& theta_p) {
    return ClonePair{theta_p, theta_p};
}

LossBreakdown ssl_step(const models::Model& m, nn::Parameters& theta_s, nn::Parameters& theta_t,
                       const EncodedBatch& labeled_batch,
                       const Matrix& unlabeled_features, const SslConfig& cfg,
                       nn::AdamState& opt, double lr_scale, std::uint64_t step_seed) {
    theta_s.require_same_schema(theta_t, "ssl_step (student vs teacher)");

    LossBreakdown loss;
    nn::Parameters grads;
    loss.ld = supervised_pass(m, theta_s, labeled_batch, nn::Mode::Train,
                              derive_seed(step_seed, 1), &grads);

    if (cfg.wc > 0.0 && unlabeled_features.rows > 0) {
        models::ForwardResult student = models::forward_all(
            m, theta_s, unlabeled_features, nn::Mode::Train, derive_seed(step_seed, 2), true);
        // Teacher in eval mode; its outputs are targets, never differentiated.
        models::ForwardResult teacher = models::forward_all(
            m, theta_t, unlabeled_features, nn::Mode::Eval, 0, false);

        std::vector<Matrix> d_heads(m.heads.size());
        for (std::size_t i = 0; i < m.heads.size(); ++i) {
            if (!m.heads[i].has_consistency) continue;
            nn::LossValue lv =
                nn::loss_eval(m.heads[i].cons_loss, student.head_out[i], teacher.head_out[i]);
            loss.lc += lv.value;
            for (auto& g : lv.grad.v) g *= cfg.wc;
            d_heads[i] = std::move(lv.grad);
        }
        models::backward_all(m, theta_s, student, d_heads, grads);
    }

    loss.lt = loss.ld + cfg.wc * loss.lc;
    nn::adam_step(theta_s, grads, opt, models::lr_by_tensor(m, theta_s, lr_scale));
    theta_t.ema_blend(theta_s, cfg.alpha);
    return loss;
}

nn::Parameters ssl_train(const models::Model& m, const nn::Parameters& theta_p,
                         const EncodedBatch& labeled, const Matrix& unlabeled,
                         const SslConfig& cfg, std::ostream* log, const GammaProbe* probe) {
    cfg.validate();
    if (!labeled.has_targets || labeled.features.rows == 0)
        throw TrainError("ssl_train: labeled data required");
    if (unlabeled.rows == 0)
        throw TrainError("ssl_train: unlabeled data required");

    ClonePair pair = clone(theta_p);
    nn::AdamState opt;
    nn::PlateauScheduler sched;
    sched.patience = cfg.scheduler_patience;
    nn::EarlyStopping stop;
    stop.patience = cfg.early_stop_patience;
    double lr_scale = 1.0;

    const std::size_t n_long = std::max(labeled.features.rows, unlabeled.rows);
    const std::size_t steps_per_epoch = (n_long + cfg.batch_size - 1) / cfg.batch_size;
    CyclingStream ls(labeled.features.rows, derive_seed(cfg.seed, 0x1ab));
    CyclingStream us(unlabeled.rows, derive_seed(cfg.seed, 0x7a6));

    log_header(log);

    nn::Parameters best_teacher = pair.teacher;
    double best_lt = 0.0;
    bool have_best = false;
    std::uint64_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        try {
            double ld_sum = 0.0, lc_sum = 0.0, lt_sum = 0.0;
            for (std::size_t s = 0; s < steps_per_epoch; ++s) {
                // Last batch of the epoch shrinks with the longer stream so
                // both branches always see equal batch sizes.
                std::size_t count = std::min(cfg.batch_size, n_long - s * cfg.batch_size);
                std::vector<std::size_t> li = ls.take(count);
                std::vector<std::size_t> ui = us.take(count);
                EncodedBatch lb = take_batch(labeled, li, 0, li.size());
                Matrix ub = take_rows(unlabeled, ui, 0, ui.size());
                LossBreakdown lo = ssl_step(m, pair.student, pair.teacher, lb, ub, cfg, opt,
                                            lr_scale, derive_seed(cfg.seed, 0x55e9 + step));
                ld_sum += lo.ld;
                lc_sum += lo.lc;
                lt_sum += lo.lt;
                ++step;
            }
            double ld = ld_sum / double(steps_per_epoch);
            double lc = lc_sum / double(steps_per_epoch);
            double lt = lt_sum / double(steps_per_epoch);

            std::optional<double> gamma;
            if (probe && *probe) gamma = (*probe)(pair.teacher);
            log_row(log, epoch, ld, lc, lt, m.group_lr.at("enc") * lr_scale, gamma);

            if (!have_best || lt < best_lt) {
                best_lt = lt;
                best_teacher = pair.teacher;
                have_best = true;
            }
            if (sched.observe(lt)) lr_scale *= sched.factor;
            if (stop.observe(lt)) break;
        } catch (const TrainError& e) {
            throw TrainError(std::string(e.what()) + " [ssl epoch " + std::to_string(epoch) +
                             "]");
        }
    }
    return best_teacher;
}

} // namespace mtwf::mt
