#include "tractokit/kernels/kernels.hpp"

#include <cmath>
#include <cstring>

namespace tractokit::kernels {
namespace {

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c + i * ldc;
        if (!accumulate) std::memset(crow, 0, n * sizeof(float));
        const float* arow = a + i * lda;
        for (std::size_t p = 0; p < k; ++p) {
            const float av = arow[p];
            if (av == 0.0f) continue;
            const float* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        float* crow = c + i * ldc;
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = b + j * ldb;
            float acc = 0.0f;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, std::size_t lda,
                    const float* b, std::size_t ldb,
                    float* c, std::size_t ldc, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, n * sizeof(float));
    for (std::size_t p = 0; p < k; ++p) {
        const float* arow = a + p * lda;  // length m
        const float* brow = b + p * ldb;  // length n
        for (std::size_t i = 0; i < m; ++i) {
            const float av = arow[i];
            if (av == 0.0f) continue;
            float* crow = c + i * ldc;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void relu_fwd_scalar(const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_acc_scalar(const float* x, const float* dy, float* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0f) dx[i] += dy[i];
}

void vadd_scalar(const float* a, const float* b, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vscale_scalar(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

bool finite_all_scalar(const float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

inline double point_dist(const double* p, const double* q) {
    const double dx = p[0] - q[0];
    const double dy = p[1] - q[1];
    const double dz = p[2] - q[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Palindromic summation: accumulate the i-th and (m-1-i)-th terms together so
// the addition order is identical when either polyline is reversed. That makes
// the two means exactly symmetric under flips, not just up to rounding.
void polyline_pair_dist_scalar(const double* a, const double* b, std::size_t m,
                               double* direct_mean, double* flipped_mean) {
    double ds = 0.0, fs = 0.0;
    const std::size_t half = m / 2;
    for (std::size_t i = 0; i < half; ++i) {
        const std::size_t r = m - 1 - i;
        ds += point_dist(a + 3 * i, b + 3 * i) + point_dist(a + 3 * r, b + 3 * r);
        fs += point_dist(a + 3 * i, b + 3 * r) + point_dist(a + 3 * r, b + 3 * i);
    }
    if (m & 1) {
        const std::size_t c = half;
        const double mid_direct = point_dist(a + 3 * c, b + 3 * c);
        ds += mid_direct;
        fs += mid_direct;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    *direct_mean = ds * inv_m;
    *flipped_mean = fs * inv_m;
}

}  // namespace

const Kernels& scalar() {
    static const Kernels k = {
        "scalar",
        gemm_nn_scalar, gemm_nt_scalar, gemm_tn_scalar,
        relu_fwd_scalar, relu_bwd_acc_scalar,
        vadd_scalar, axpy_scalar, vscale_scalar,
        finite_all_scalar,
        polyline_pair_dist_scalar,
    };
    return k;
}

}  // namespace tractokit::kernels
