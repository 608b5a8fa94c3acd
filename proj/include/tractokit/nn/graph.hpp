#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "tractokit/nn/tensor.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit::nn {

enum class Mode { kTrain, kEval };

using NodeId = std::uint32_t;

// A named trainable tensor. Gradients accumulate into `grad` during
// Graph::backward; a frozen parameter enters graphs as a constant and never
// receives gradient.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool frozen = false;

    Parameter() = default;
    Parameter(std::string n, Shape s)
        : name(std::move(n)), value(std::move(s)), grad(value.shape) {
        value.requires_grad = true;
    }

    void zero_grad() { grad.fill(T(0)); }
    void freeze(bool on) {
        frozen = on;
        value.requires_grad = !on;
    }
};

// Reverse-mode tape. Ops append nodes in topological order; backward sweeps
// the tape once in reverse from a scalar loss. One backward per graph; build
// a fresh graph per step. Mode and RNG live here so stochastic ops (dropout,
// Gumbel sampling) are reproducible from the graph seed.
template <typename T>
class Graph {
public:
    using Id = NodeId;
    // Called with (graph, own id); reads grad(self), accumulates into parents.
    using PullFn = std::function<void(Graph&, Id)>;

    explicit Graph(Mode mode = Mode::kEval, std::uint64_t seed = 0)
        : mode_(mode), rng_(seed) {}

    Mode mode() const { return mode_; }
    bool training() const { return mode_ == Mode::kTrain; }
    Rng& rng() { return rng_; }

    // Constant leaf (input data). Checked for finiteness.
    Id input(Tensor<T> v);
    // Parameter leaf; differentiable unless p.frozen.
    Id param(Parameter<T>& p);
    // Interior op node. v is the op's output, checked for finiteness.
    Id make(Tensor<T> v, std::vector<Id> parents, PullFn pull);

    // References returned by val/grad stay valid while nodes are appended
    // (deque storage), so callers may hold them across op calls.
    const Tensor<T>& val(Id id) const { return nodes_[id].value; }
    // Gradient buffer, allocated as zeros on first touch.
    Tensor<T>& grad(Id id);
    bool has_grad(Id id) const { return !nodes_[id].grad.data.empty(); }
    bool needs_grad(Id id) const { return nodes_[id].needs; }

    // Reverse sweep from a scalar node. Returns the distinct parameters that
    // received gradient, in registration order.
    std::vector<Parameter<T>*> backward(Id loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        PullFn pull;
        std::vector<Id> parents;
        Parameter<T>* param = nullptr;
        bool needs = false;
    };

    Id push(Node n);

    std::deque<Node> nodes_;
    Mode mode_;
    Rng rng_;
    bool swept_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace tractokit::nn
