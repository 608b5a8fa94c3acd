#include "tractokit/nn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "tractokit/kernels/kernels.hpp"
#include "tractokit/util/error.hpp"

namespace tractokit::nn {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

bool all_finite(const float* x, std::size_t n) {
    return kernels::active().finite_all_f32(x, n);
}

bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

template <typename T>
typename Graph<T>::Id Graph<T>::push(Node n) {
    if (!all_finite(n.value))
        throw NumericError("non-finite value in forward pass at node " +
                           std::to_string(nodes_.size()));
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

template <typename T>
typename Graph<T>::Id Graph<T>::input(Tensor<T> v) {
    Node n;
    n.value = std::move(v);
    return push(std::move(n));
}

template <typename T>
typename Graph<T>::Id Graph<T>::param(Parameter<T>& p) {
    Node n;
    n.value = p.value;
    if (!p.frozen) {
        n.param = &p;
        n.needs = true;
    }
    return push(std::move(n));
}

template <typename T>
typename Graph<T>::Id Graph<T>::make(Tensor<T> v, std::vector<Id> parents, PullFn pull) {
    Node n;
    n.value = std::move(v);
    for (Id p : parents) n.needs = n.needs || nodes_[p].needs;
    if (n.needs) {
        n.parents = std::move(parents);
        n.pull = std::move(pull);
    }
    return push(std::move(n));
}

template <typename T>
Tensor<T>& Graph<T>::grad(Id id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
    return n.grad;
}

template <typename T>
std::vector<Parameter<T>*> Graph<T>::backward(Id loss) {
    if (swept_) throw InvalidInputError("backward called twice on one graph");
    if (val(loss).numel() != 1)
        throw InvalidInputError("backward requires a scalar, got shape " +
                                shape_str(val(loss).shape));
    swept_ = true;
    grad(loss).data[0] = T(1);

    std::vector<Parameter<T>*> touched;
    for (Id id = loss + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.needs || n.grad.data.empty()) continue;
        if (n.pull) n.pull(*this, id);
        if (n.param) {
            Tensor<T>& pg = n.param->grad;
            for (std::size_t i = 0; i < pg.numel(); ++i) pg.data[i] += n.grad.data[i];
            if (std::find(touched.begin(), touched.end(), n.param) == touched.end())
                touched.push_back(n.param);
        }
    }
    std::reverse(touched.begin(), touched.end());
    return touched;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace tractokit::nn
