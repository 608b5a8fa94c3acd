#pragma once

#include <vector>

#include "tractokit/core/streamline.hpp"
#include "tractokit/nn/tensor.hpp"
#include "tractokit/repr/representations.hpp"

namespace tractokit::model {

// Batch representation objects into network input tensors. All items in a
// batch must share the per-item geometry (grid side / point count / patch
// layout); a mismatch throws.

// (B, 3, S, S) channel-first descriptor grids.
template <typename T>
nn::Tensor<T> descriptor_batch(const std::vector<FiberDescriptor>& ds);

// (B, 3, n) channel-first point clouds.
template <typename T>
nn::Tensor<T> cloud_batch(const std::vector<PointCloud>& cs);

// (B, p_f, p_local, 3) patch sets.
template <typename T>
nn::Tensor<T> patch_batch(const std::vector<PatchSet>& ps);

}  // namespace tractokit::model
