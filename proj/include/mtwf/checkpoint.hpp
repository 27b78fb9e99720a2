#pragma once

#include "mtwf/nn.hpp"

#include <string>

namespace mtwf::checkpoint {

// Binary model snapshot.
//
// Layout (all integers little-endian):
//   magic   "MTWF" (4 bytes)
//   version u32 (currently 1)
//   count   u32 (number of tensors)
//   count * { name_len u16, name bytes, rank u8, rank * dim u32, values f64 }
//   meta_len u32, meta bytes (UTF-8 JSON)
//
// The JSON footer carries whatever run metadata the caller supplies (AP mask,
// coordinate scaler, model spec) so a checkpoint is self-describing.

inline constexpr std::uint32_t kVersion = 1;

struct Snapshot {
    nn::Parameters params;
    std::string meta_json;
};

void save(const std::string& path, const nn::Parameters& params, const std::string& meta_json);
Snapshot load(const std::string& path);

} // namespace mtwf::checkpoint
