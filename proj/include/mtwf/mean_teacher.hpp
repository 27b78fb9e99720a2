#pragma once

#include "mtwf/models.hpp"
#include "mtwf/nn.hpp"
#include "mtwf/preprocess.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>

namespace mtwf::mt {

struct SslConfig {
    double alpha = 0.999;          // EMA smoothing
    double wc = 6.0;               // consistency weight
    std::size_t batch_size = 32;
    int scheduler_patience = 6;
    int early_stop_patience = 12;
    std::size_t max_epochs = 300;
    std::size_t pretrain_max_epochs = 100;
    std::size_t sae_epochs = 10;
    std::uint64_t seed = 42;

    void validate() const;
};

struct LossBreakdown {
    double ld = 0.0; // prediction loss, summed over heads
    double lc = 0.0; // consistency loss, summed over consistency heads
    double lt = 0.0; // ld + wc*lc, exactly as computed
};

// Optional dev-set probe logged per epoch (success rate of the parameters
// under evaluation); keeps this module independent of the evaluate module.
using GammaProbe = std::function<double(const nn::Parameters&)>;

// Supervised pre-training: per-head prediction losses summed, early stopping
// on a 10% held-out slice (falls back to the training loss when the slice
// would be empty), plateau scheduling on the training mean. Returns the final
// weights. pretrain_max_epochs == 0 returns `params` untouched.
nn::Parameters pretrain(const models::Model& m, nn::Parameters params,
                        const EncodedBatch& labeled, const SslConfig& cfg,
                        std::ostream* log = nullptr, const GammaProbe* probe = nullptr);

struct ClonePair {
    nn::Parameters student;
    nn::Parameters teacher;
};
ClonePair clone(const nn::Parameters& theta_p);

// One SSL step: supervised pass on the labeled batch, consistency pass on the
// unlabeled batch (teacher in eval mode, treated as a constant target), one
// Adam update of the student, then the EMA teacher update. With wc == 0 the
// unlabeled pass is skipped entirely, so the student update is bit-equal to a
// purely supervised step.
LossBreakdown ssl_step(const models::Model& m, nn::Parameters& theta_s, nn::Parameters& theta_t,
                       const EncodedBatch& labeled_batch,
                       const Matrix& unlabeled_features, const SslConfig& cfg,
                       nn::AdamState& opt, double lr_scale, std::uint64_t step_seed);

// Full SSL phase: clone, paired labeled/unlabeled batch streams (the shorter
// recycles with a reshuffle; an epoch is one pass over the longer), scheduler
// and early stopping on the epoch-mean total loss. Returns the teacher
// snapshot from the best epoch.
nn::Parameters ssl_train(const models::Model& m, const nn::Parameters& theta_p,
                         const EncodedBatch& labeled, const Matrix& unlabeled,
                         const SslConfig& cfg, std::ostream* log = nullptr,
                         const GammaProbe* probe = nullptr);

} // namespace mtwf::mt
