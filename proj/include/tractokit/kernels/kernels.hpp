#pragma once

#include <cstddef>

namespace tractokit::kernels {

// Low-level compute kernels behind everything hot: GEMM for the neural nets,
// elementwise ops, and the inner pointwise-distance loop of the streamline
// metric. Two implementations ship — a portable scalar reference and an AVX2
// variant — selected once at startup by CPU feature detection. The env var
// TRACTOKIT_KERNELS=scalar|avx2 forces a backend.
//
// All matrices are row-major, single precision.
struct Kernels {
    const char* name;

    // C[m,n] (+)= A[m,k] * B[k,n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate);
    // C[m,n] (+)= A[m,k] * B[n,k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate);
    // C[m,n] (+)= A[k,m]^T * B[k,n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate);

    // y[i] = max(x[i], 0)
    void (*relu_fwd)(const float* x, float* y, std::size_t n);
    // dx[i] += x[i] > 0 ? dy[i] : 0
    void (*relu_bwd_acc)(const float* x, const float* dy, float* dx, std::size_t n);
    // y[i] = a[i] + b[i]
    void (*vadd)(const float* a, const float* b, float* y, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
    // y[i] = alpha * x[i]
    void (*vscale)(float alpha, const float* x, float* y, std::size_t n);
    // true iff every element is finite (no NaN/Inf)
    bool (*finite_all_f32)(const float* x, std::size_t n);

    // Mean pointwise distances between two equal-length polylines
    // (m points each, xyz interleaved): direct order and one reversed.
    // Summation is palindromic — terms i and m-1-i are paired — so both
    // outputs are exactly invariant under reversing either input.
    void (*polyline_pair_dist)(const double* a, const double* b, std::size_t m,
                               double* direct_mean, double* flipped_mean);
};

// Backend selected at startup (honors TRACTOKIT_KERNELS).
const Kernels& active();
// Portable reference implementation.
const Kernels& scalar();
// Lookup by name ("scalar", "avx2"); returns nullptr if the backend is
// unavailable on this machine.
const Kernels* by_name(const char* name);

}  // namespace tractokit::kernels
