#pragma once

#include <string>

#include "ddg/base_model.hpp"

namespace ddg {

// Versioned binary container of named parameter matrices:
//   "DDGC" | version u32 | count u32 | { name_len u32, name, rows u32,
//   cols u32, rows*cols f64 little-endian } ...
void save_checkpoint(const ModelParams& params, const std::string& path);

// Loads into a template whose names/shapes must match exactly; throws
// CheckpointError otherwise.
void load_checkpoint(const std::string& path, ModelParams& params);

// In-memory forms, used for bitwise comparisons.
std::string checkpoint_bytes(const ModelParams& params);

}  // namespace ddg
