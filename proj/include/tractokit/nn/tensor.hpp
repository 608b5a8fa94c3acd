#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tractokit::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor. T is float (training) or double (gradient checks).
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0))
        : shape(std::move(s)), data(shape_numel(shape), fill) {}

    static Tensor scalar(T v) {
        Tensor t(Shape{});
        t.data.assign(1, v);
        return t;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void fill(T v) { data.assign(data.size(), v); }

    bool operator==(const Tensor&) const = default;
};

// True iff every element is finite. Uses the SIMD kernel for f32.
bool all_finite(const float* x, std::size_t n);
bool all_finite(const double* x, std::size_t n);

template <typename T>
bool all_finite(const Tensor<T>& t) {
    return all_finite(t.ptr(), t.numel());
}

}  // namespace tractokit::nn
