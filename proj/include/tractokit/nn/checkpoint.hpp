#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tractokit/nn/layers.hpp"

namespace tractokit::nn {

// TKPT checkpoint container (version 1, little-endian):
//   magic "TKPT" | u32 version | u8 dtype (0=f32, 1=f64) | u64 step
//   | str stage | u32 n_tensors | per tensor: str name, u32 rank,
//   u64 dims[rank], raw buffer (numel elements).
// Documented in docs/formats.md.

template <typename T>
struct Checkpoint {
    std::uint64_t step = 0;
    std::string stage;
    std::vector<std::pair<std::string, Tensor<T>>> tensors;
};

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<NamedTensor<T>>& state,
                     std::uint64_t step, const std::string& stage);

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

// Load a checkpoint into live tensors, matched by name. The file must carry
// exactly the names in `state` with identical shapes; any mismatch is a
// FormatError (shape mismatches report the offending tensor's byte offset).
// Returns the stored step count.
template <typename T>
std::uint64_t load_state(const std::string& path, const std::vector<NamedTensor<T>>& state);

}  // namespace tractokit::nn
