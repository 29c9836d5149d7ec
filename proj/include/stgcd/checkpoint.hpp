#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stgcd/tensor.hpp"

namespace stgcd {

// Named-tensor container: a text header (format version, entry count, then one
// `name rank d0 d1 ...` line per entry) followed by little-endian 64-bit real
// payloads in header order.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::string& path, const NamedTensors& entries);
NamedTensors load_checkpoint(const std::string& path);

// Copies payloads from `entries` into matching tensors of `params` in place;
// throws on missing names or shape mismatches.
void restore_parameters(const NamedTensors& entries, const NamedTensors& params);

}  // namespace stgcd
