#pragma once

#include <string>

#include "transmusic/nn/param_store.hpp"

namespace transmusic::nn {

// TMCK binary checkpoint. Layout (little-endian):
//   magic "TMCK", u32 version = 1, u32 count,
//   count entries of { u16 name length, UTF-8 name, u8 rank, u32 dims..., f64 values... }
//   u8 optimizer flag; when 1: u64 step, then two more entry sections of the
//   same layout holding the first and second Adam moments.
void save_checkpoint(const std::string& path, const ParamStore& store, bool include_optimizer);

struct LoadedCheckpoint {
    ParamStore store;
    bool has_optimizer = false;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace transmusic::nn
