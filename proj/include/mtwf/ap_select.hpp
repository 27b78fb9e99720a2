#pragma once

#include "mtwf/dataset.hpp"

#include <string>
#include <vector>

namespace mtwf {

// Ordered list of retained AP identifiers. An AP survives when its raw RSSI
// column (sentinel included) shows at least 2 distinct values over the merged
// labeled+unlabeled rows; constant columns carry no information.
struct SelectionMask {
    std::vector<std::string> selected_ids; // original column order preserved
    std::uint64_t source_fingerprint = 0;  // feature_hash of the merged data

    std::size_t size() const { return selected_ids.size(); }
};

// Algorithm: scan each AP column of the merged rows and retain it iff any
// value differs from the first. Runs on raw dBm values, before normalization.
// The test set never participates. `unlabeled` may be an empty dataset.
SelectionMask build_mask(const Dataset& labeled, const Dataset& unlabeled);

// Project a dataset onto the mask columns; labels and row order untouched.
// Idempotent on already-projected data. Missing AP id -> DataError.
Dataset apply_mask(const Dataset& d, const SelectionMask& mask);

// Identity mask over all columns of d (ablation runs without selection).
SelectionMask full_mask(const Dataset& d);

// Text persistence: first line is the source fingerprint hex digest, then one
// AP identifier per line.
void save_mask(const SelectionMask& mask, const std::string& path);
SelectionMask load_mask(const std::string& path);

} // namespace mtwf
