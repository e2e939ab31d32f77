#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "maelab/params.hpp"

namespace maelab {

// TGCK container: magic "TGCK", version u32, parameter count u32, then
// per parameter: name length u32, name bytes, rank u32, extents u32
// each, values f64. All integers and floats little-endian.
inline constexpr uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const ParamSet& params);

// Every entry in file order. Tensors are plain values (no grad).
std::vector<std::pair<std::string, Tensor>> read_checkpoint(const std::filesystem::path& path);

// Copies file entries whose name starts with `prefix` into matching
// parameters. Returns the number of entries loaded; throws FormatError
// if a selected entry is missing from `params`, has a different shape,
// or nothing matches at all.
size_t load_checkpoint(ParamSet& params, const std::filesystem::path& path,
                       const std::string& prefix = "");

}  // namespace maelab
