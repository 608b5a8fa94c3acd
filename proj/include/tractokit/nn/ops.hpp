#pragma once

#include <cstdint>
#include <vector>

#include "tractokit/nn/graph.hpp"

namespace tractokit::nn {

// Differentiable ops. Each appends one node to the graph; the backward
// closure accumulates into whichever parents need gradient. Shapes are
// validated up front (InvalidInputError) and every output is checked for
// finiteness by the graph (NumericError).

// Elementwise and structural.
template <typename T> NodeId add(Graph<T>& g, NodeId a, NodeId b);
template <typename T> NodeId scale(Graph<T>& g, NodeId x, T alpha);
template <typename T> NodeId relu(Graph<T>& g, NodeId x);
// Inverted dropout: train mode zeroes with probability p and scales the rest
// by 1/(1-p); eval mode is the identity.
template <typename T> NodeId dropout(Graph<T>& g, NodeId x, double p);
template <typename T> NodeId reshape(Graph<T>& g, NodeId x, Shape s);
// Swap the last two axes of a rank-3 tensor: (B,C,N) -> (B,N,C).
template <typename T> NodeId transpose_12(Graph<T>& g, NodeId x);
// Concatenate along `axis`; all other dimensions must match.
template <typename T> NodeId concat(Graph<T>& g, const std::vector<NodeId>& xs, std::size_t axis);
// Scalar <w, x> against a constant w of x's shape (test/gradcheck scalarizer).
template <typename T> NodeId weighted_sum(Graph<T>& g, NodeId x, Tensor<T> w);

// Linear algebra. Row-major; f32 routes through the kernel backend.
template <typename T> NodeId matmul(Graph<T>& g, NodeId a, NodeId b);  // (M,K)@(K,N)
template <typename T> NodeId bmm(Graph<T>& g, NodeId a, NodeId b);     // (B,M,K)@(B,K,N)

// Pooling. maxpool2x2: (B,C,H,W) -> (B,C,floor(H/2),floor(W/2)), stride 2.
// global_maxpool reduces all trailing spatial axes: (C,N)->(C),
// (B,C,N)->(B,C), (B,C,H,W)->(B,C). Exactly permutation-invariant over the
// reduced axes.
template <typename T> NodeId maxpool2x2(Graph<T>& g, NodeId x);
template <typename T> NodeId global_maxpool(Graph<T>& g, NodeId x);

// Losses (scalar outputs, batch means).
template <typename T>
NodeId cross_entropy_loss(Graph<T>& g, NodeId logits, const std::vector<std::uint16_t>& labels);
// Mean of -(1-p_t)^gamma * log(p_t); gamma = 0 reduces to cross-entropy.
template <typename T>
NodeId focal_loss(Graph<T>& g, NodeId logits, const std::vector<std::uint16_t>& labels,
                  double gamma = 2.0);
// Unsquared (Euclidean-norm) chamfer distance between clouds shaped
// (...,Na,3) and (...,Nb,3) with matching leading dims; mean over the pairs.
template <typename T> NodeId chamfer_l1(Graph<T>& g, NodeId a, NodeId b);
// Mean over tokens of KL(softmax(logits) || Uniform(V)) for logits (..., V).
template <typename T> NodeId kl_to_uniform(Graph<T>& g, NodeId logits);

// softmax((logits + Gumbel)/tau) along the last axis; hard selects the
// one-hot argmax with straight-through gradients via the soft sample.
template <typename T>
NodeId gumbel_softmax_sample(Graph<T>& g, NodeId logits, double tau, bool hard);
// One-hot argmax along the last axis; blocks gradient (inference path).
template <typename T> NodeId hard_assign(Graph<T>& g, NodeId logits);

}  // namespace tractokit::nn
