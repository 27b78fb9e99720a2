#pragma once

#include "mtwf/nn.hpp"
#include "mtwf/rng.hpp"

#include <string>

// Central finite-difference check of Sequential::backward against
// Sequential::forward + loss_eval. Dropout masks are pinned by the fixed
// dropout seed, so perturbed evaluations see identical masks.

namespace gradcheck {

struct Result {
    double max_rel = 0.0;    // worst relative error over parameters and input
    std::string worst;       // coordinate label of the worst entry
};

// Builds random inputs/targets for the given loss kind (one-hot rows for CE,
// {0,1} entries for BCE), runs one forward/backward in Train mode, and
// compares every parameter gradient plus the input gradient against central
// differences with step h.
Result check_sequential(const mtwf::nn::Sequential& seq, mtwf::nn::LossKind kind,
                        std::size_t rows, std::uint64_t seed, double h = 1e-5);

} // namespace gradcheck
