#pragma once

#include <cstddef>

#include "tractokit/kernels/kernels.hpp"

namespace tractokit::nn::blas {

// Row-major GEMM shims. f32 routes through the runtime kernel backend; f64
// uses reference loops (only gradient checks run at f64, on small shapes).

template <typename T>
void mm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
           const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * ldc + j] : T(0);
            for (std::size_t t = 0; t < k; ++t) acc += a[i * lda + t] * b[t * ldb + j];
            c[i * ldc + j] = acc;
        }
    }
}

template <typename T>
void mm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
           const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * ldc + j] : T(0);
            for (std::size_t t = 0; t < k; ++t) acc += a[i * lda + t] * b[j * ldb + t];
            c[i * ldc + j] = acc;
        }
    }
}

template <typename T>
void mm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
           const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * ldc + j] : T(0);
            for (std::size_t t = 0; t < k; ++t) acc += a[t * lda + i] * b[t * ldb + j];
            c[i * ldc + j] = acc;
        }
    }
}

template <>
inline void mm_nn<float>(std::size_t m, std::size_t n, std::size_t k, const float* a,
                         std::size_t lda, const float* b, std::size_t ldb, float* c,
                         std::size_t ldc, bool accumulate) {
    kernels::active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <>
inline void mm_nt<float>(std::size_t m, std::size_t n, std::size_t k, const float* a,
                         std::size_t lda, const float* b, std::size_t ldb, float* c,
                         std::size_t ldc, bool accumulate) {
    kernels::active().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <>
inline void mm_tn<float>(std::size_t m, std::size_t n, std::size_t k, const float* a,
                         std::size_t lda, const float* b, std::size_t ldb, float* c,
                         std::size_t ldc, bool accumulate) {
    kernels::active().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace tractokit::nn::blas
