// Parameter checkpoint container.
//
// Byte layout (little-endian throughout):
//   magic   8 bytes  "MDTCKPT\0"
//   version u32      currently 1
//   count   u32      number of entries
//   entry*  count times:
//     name_len u32, name bytes (no terminator),
//     ndim u32, extents u64[ndim],
//     values f64[prod(extents)] row-major
//
// Entries round-trip in order, so identical parameter sets serialize to
// identical bytes.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mdt/tensor.hpp"

namespace mdt {

using ParamDict = std::vector<std::pair<std::string, Tensord>>;

void save_checkpoint(const std::string& path, const ParamDict& params);
ParamDict load_checkpoint(const std::string& path);

/// FNV-1a fingerprint of a file's bytes (for reproducibility checks).
std::uint64_t file_fingerprint(const std::string& path);

}  // namespace mdt
