#pragma once

#include "mtwf/dataset.hpp"

#include <cstdint>
#include <string>

// Synthetic UJIIndoorLoc-shaped fingerprints for tests: 3 buildings with
// fixed centers, floors 0..3, path-loss RSSI from a deterministic AP layout.
// Every 6th AP is dead (never detected -> constant column), every other AP is
// detected by at least one same-building row, so after constant-column
// selection exactly aps - aps/6 columns survive. Timestamps repeat in small
// groups so stable-sort tie handling is exercised.

namespace synth {

struct Options {
    std::size_t train_rows = 48;
    std::size_t val_rows = 16;
    std::size_t aps = 24;
    std::uint64_t seed = 7;
};

struct Corpus {
    mtwf::Dataset train;
    mtwf::Dataset validation;
};

Corpus make(const Options& opt);

struct Paths {
    std::string train;
    std::string validation;
};

// Writes trainingData.csv / validationData.csv under dir (created if needed).
Paths write(const Corpus& c, const std::string& dir);

// make + write in one go.
Paths generate(const Options& opt, const std::string& dir);

} // namespace synth
