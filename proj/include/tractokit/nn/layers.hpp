#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tractokit/nn/graph.hpp"
#include "tractokit/nn/ops.hpp"

namespace tractokit::nn {

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T>* tensor;
};

// Xavier-uniform fill: U(-a, a) with a = sqrt(6/(fan_in+fan_out)).
template <typename T>
void xavier_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Fully connected: y = x @ W^T + b for x (B,in) -> (B,out).
template <typename T>
class Linear {
public:
    Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

    NodeId forward(Graph<T>& g, NodeId x);
    void params(std::vector<Parameter<T>*>& out);
    void state(std::vector<NamedTensor<T>>& out);

    Parameter<T> W;  // (out, in)
    Parameter<T> b;  // (out)
};

// 3x3 convolution, stride 1, same (zero) padding: (B,Cin,H,W) -> (B,Cout,H,W).
// Weights are kept flattened (Cout, Cin*9) for the im2col GEMM.
template <typename T>
class Conv2D {
public:
    Conv2D(const std::string& name, std::size_t cin, std::size_t cout, Rng& rng);

    NodeId forward(Graph<T>& g, NodeId x);
    void params(std::vector<Parameter<T>*>& out);
    void state(std::vector<NamedTensor<T>>& out);

    std::size_t cin, cout;
    Parameter<T> W;  // (cout, cin*9)
    Parameter<T> b;  // (cout)
};

// Pointwise (kernel 1) convolution: (B,Cin,N) -> (B,Cout,N).
template <typename T>
class Conv1D {
public:
    Conv1D(const std::string& name, std::size_t cin, std::size_t cout, Rng& rng);

    NodeId forward(Graph<T>& g, NodeId x);
    void params(std::vector<Parameter<T>*>& out);
    void state(std::vector<NamedTensor<T>>& out);

    std::size_t cin, cout;
    Parameter<T> W;  // (cout, cin)
    Parameter<T> b;  // (cout)
};

// Batch normalization over the channel axis of (B,C) or (B,C,N) input.
// Training uses batch statistics and updates running stats (momentum-blended,
// torch-style unbiased running variance); eval is a fixed affine map.
template <typename T>
class BatchNorm {
public:
    BatchNorm(const std::string& name, std::size_t c, double eps = 1e-5,
              double momentum = 0.1);

    NodeId forward(Graph<T>& g, NodeId x);
    void params(std::vector<Parameter<T>*>& out);
    void state(std::vector<NamedTensor<T>>& out);

    std::size_t channels;
    double eps, momentum;
    Parameter<T> gamma, beta;      // (C) each
    Tensor<T> running_mean, running_var;  // buffers, not trained

private:
    std::string name_;
};

// PointNet spatial/feature transform. Regresses a (k,k) matrix from (B,k,N)
// and applies it to the points. The final layer is zero-initialized and an
// identity offset is added, so the transform starts exactly at I_k. `base`
// scales the internal widths (64 gives the standard 64/128/1024/512/256).
template <typename T>
class STNkD {
public:
    STNkD(const std::string& name, std::size_t k, std::size_t base, Rng& rng);

    // The regressed (B,k,k) transform.
    NodeId transform(Graph<T>& g, NodeId x);
    // transform(x) @ x: (B,k,N) -> (B,k,N).
    NodeId forward(Graph<T>& g, NodeId x);
    void params(std::vector<Parameter<T>*>& out);
    void state(std::vector<NamedTensor<T>>& out);

    std::size_t k;
    Conv1D<T> c1, c2, c3;
    BatchNorm<T> bn1, bn2, bn3, bn4, bn5;
    Linear<T> f1, f2, f3;
};

// DGCNN edge convolution: feature-space kNN (K neighbors, self included),
// edge features concat(x_j - x_i, x_i), shared two-layer pointwise MLP with
// ReLU, then max over the K neighbors: (B,C,N) -> (B,Cout,N). The neighbor
// selection is recomputed from values each call and carries no gradient.
template <typename T>
class EdgeConv {
public:
    EdgeConv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
             Rng& rng);

    NodeId forward(Graph<T>& g, NodeId x);
    void params(std::vector<Parameter<T>*>& out);
    void state(std::vector<NamedTensor<T>>& out);

    std::size_t cin, cout, k;
    Conv1D<T> lin1, lin2;
};

// K nearest tokens per token by squared feature distance (self included,
// distance ties broken by lower index). x is (B,C,N); result is (B*N*K)
// neighbor column indices.
template <typename T>
std::vector<std::uint32_t> knn_feature_graph(const Tensor<T>& x, std::size_t k);

// Max over groups of `k` consecutive entries along the last axis:
// (B,C,N*k) -> (B,C,N).
template <typename T>
NodeId group_max(Graph<T>& g, NodeId x, std::size_t k);

// Gather edge features for EdgeConv: x (B,C,N) and a (B*N*K) neighbor index
// table produce (B, 2C, N*K) with rows [x_j - x_i ; x_i].
template <typename T>
NodeId edge_features(Graph<T>& g, NodeId x, std::vector<std::uint32_t> idx, std::size_t k);

}  // namespace tractokit::nn
