// AVX2+FMA backend. Compiled with -mavx2 -mfma on x86_64 only; callers reach
// it exclusively through the dispatch table after a cpuid check.
#include "backends.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace tractokit::kernels {
namespace {

// 4x16 register-blocked micro-kernel: 8 ymm accumulators, k innermost.
void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k,
                  const float* a, std::size_t lda,
                  const float* b, std::size_t ldb,
                  float* c, std::size_t ldc, bool accumulate) {
    const std::size_t n16 = n - n % 16;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const float* a0 = a + (i + 0) * lda;
        const float* a1 = a + (i + 1) * lda;
        const float* a2 = a + (i + 2) * lda;
        const float* a3 = a + (i + 3) * lda;
        float* c0 = c + (i + 0) * ldc;
        float* c1 = c + (i + 1) * ldc;
        float* c2 = c + (i + 2) * ldc;
        float* c3 = c + (i + 3) * ldc;
        for (std::size_t j = 0; j < n16; j += 16) {
            __m256 acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
            if (accumulate) {
                acc00 = _mm256_loadu_ps(c0 + j);
                acc01 = _mm256_loadu_ps(c0 + j + 8);
                acc10 = _mm256_loadu_ps(c1 + j);
                acc11 = _mm256_loadu_ps(c1 + j + 8);
                acc20 = _mm256_loadu_ps(c2 + j);
                acc21 = _mm256_loadu_ps(c2 + j + 8);
                acc30 = _mm256_loadu_ps(c3 + j);
                acc31 = _mm256_loadu_ps(c3 + j + 8);
            } else {
                acc00 = acc01 = acc10 = acc11 = _mm256_setzero_ps();
                acc20 = acc21 = acc30 = acc31 = _mm256_setzero_ps();
            }
            for (std::size_t p = 0; p < k; ++p) {
                const __m256 b0 = _mm256_loadu_ps(b + p * ldb + j);
                const __m256 b1 = _mm256_loadu_ps(b + p * ldb + j + 8);
                const __m256 av0 = _mm256_broadcast_ss(a0 + p);
                const __m256 av1 = _mm256_broadcast_ss(a1 + p);
                const __m256 av2 = _mm256_broadcast_ss(a2 + p);
                const __m256 av3 = _mm256_broadcast_ss(a3 + p);
                acc00 = _mm256_fmadd_ps(av0, b0, acc00);
                acc01 = _mm256_fmadd_ps(av0, b1, acc01);
                acc10 = _mm256_fmadd_ps(av1, b0, acc10);
                acc11 = _mm256_fmadd_ps(av1, b1, acc11);
                acc20 = _mm256_fmadd_ps(av2, b0, acc20);
                acc21 = _mm256_fmadd_ps(av2, b1, acc21);
                acc30 = _mm256_fmadd_ps(av3, b0, acc30);
                acc31 = _mm256_fmadd_ps(av3, b1, acc31);
            }
            _mm256_storeu_ps(c0 + j, acc00);
            _mm256_storeu_ps(c0 + j + 8, acc01);
            _mm256_storeu_ps(c1 + j, acc10);
            _mm256_storeu_ps(c1 + j + 8, acc11);
            _mm256_storeu_ps(c2 + j, acc20);
            _mm256_storeu_ps(c2 + j + 8, acc21);
            _mm256_storeu_ps(c3 + j, acc30);
            _mm256_storeu_ps(c3 + j + 8, acc31);
        }
        for (std::size_t j = n16; j < n; ++j) {
            float s0 = accumulate ? c0[j] : 0.0f;
            float s1 = accumulate ? c1[j] : 0.0f;
            float s2 = accumulate ? c2[j] : 0.0f;
            float s3 = accumulate ? c3[j] : 0.0f;
            for (std::size_t p = 0; p < k; ++p) {
                const float bv = b[p * ldb + j];
                s0 += a0[p] * bv;
                s1 += a1[p] * bv;
                s2 += a2[p] * bv;
                s3 += a3[p] * bv;
            }
            c0[j] = s0;
            c1[j] = s1;
            c2[j] = s2;
            c3[j] = s3;
        }
    }
    for (; i < m; ++i) {
        const float* arow = a + i * lda;
        float* crow = c + i * ldc;
        for (std::size_t j = 0; j < n16; j += 16) {
            __m256 acc0 = accumulate ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
            __m256 acc1 = accumulate ? _mm256_loadu_ps(crow + j + 8) : _mm256_setzero_ps();
            for (std::size_t p = 0; p < k; ++p) {
                const __m256 av = _mm256_broadcast_ss(arow + p);
                acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + p * ldb + j), acc0);
                acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + p * ldb + j + 8), acc1);
            }
            _mm256_storeu_ps(crow + j, acc0);
            _mm256_storeu_ps(crow + j + 8, acc1);
        }
        for (std::size_t j = n16; j < n; ++j) {
            float s = accumulate ? crow[j] : 0.0f;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * b[p * ldb + j];
            crow[j] = s;
        }
    }
}

inline float hsum256(__m256 v) {
    const __m128 lo = _mm256_castps256_ps128(v);
    const __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

// Dot-product form: C[i,j] = a_row_i . b_row_j. 4 j's at a time share A loads.
void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k,
                  const float* a, std::size_t lda,
                  const float* b, std::size_t ldb,
                  float* c, std::size_t ldc, bool accumulate) {
    const std::size_t k8 = k - k % 8;
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        float* crow = c + i * ldc;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const float* b0 = b + (j + 0) * ldb;
            const float* b1 = b + (j + 1) * ldb;
            const float* b2 = b + (j + 2) * ldb;
            const float* b3 = b + (j + 3) * ldb;
            __m256 acc0 = _mm256_setzero_ps();
            __m256 acc1 = _mm256_setzero_ps();
            __m256 acc2 = _mm256_setzero_ps();
            __m256 acc3 = _mm256_setzero_ps();
            for (std::size_t p = 0; p < k8; p += 8) {
                const __m256 av = _mm256_loadu_ps(arow + p);
                acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), acc0);
                acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), acc1);
                acc2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), acc2);
                acc3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), acc3);
            }
            float s0 = hsum256(acc0);
            float s1 = hsum256(acc1);
            float s2 = hsum256(acc2);
            float s3 = hsum256(acc3);
            for (std::size_t p = k8; p < k; ++p) {
                const float av = arow[p];
                s0 += av * b0[p];
                s1 += av * b1[p];
                s2 += av * b2[p];
                s3 += av * b3[p];
            }
            if (accumulate) {
                crow[j + 0] += s0;
                crow[j + 1] += s1;
                crow[j + 2] += s2;
                crow[j + 3] += s3;
            } else {
                crow[j + 0] = s0;
                crow[j + 1] = s1;
                crow[j + 2] = s2;
                crow[j + 3] = s3;
            }
        }
        for (; j < n; ++j) {
            const float* brow = b + j * ldb;
            __m256 acc = _mm256_setzero_ps();
            for (std::size_t p = 0; p < k8; p += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), acc);
            float s = hsum256(acc);
            for (std::size_t p = k8; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

// C[m,n] += A[k,m]^T B[k,n]: k innermost per 16-column C panel so the panel
// stays in registers across the whole reduction.
void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k,
                  const float* a, std::size_t lda,
                  const float* b, std::size_t ldb,
                  float* c, std::size_t ldc, bool accumulate) {
    const std::size_t n16 = n - n % 16;
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c + i * ldc;
        for (std::size_t j = 0; j < n16; j += 16) {
            __m256 acc0 = accumulate ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
            __m256 acc1 = accumulate ? _mm256_loadu_ps(crow + j + 8) : _mm256_setzero_ps();
            for (std::size_t p = 0; p < k; ++p) {
                const __m256 av = _mm256_broadcast_ss(a + p * lda + i);
                acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + p * ldb + j), acc0);
                acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + p * ldb + j + 8), acc1);
            }
            _mm256_storeu_ps(crow + j, acc0);
            _mm256_storeu_ps(crow + j + 8, acc1);
        }
        for (std::size_t j = n16; j < n; ++j) {
            float s = accumulate ? crow[j] : 0.0f;
            for (std::size_t p = 0; p < k; ++p) s += a[p * lda + i] * b[p * ldb + j];
            crow[j] = s;
        }
    }
}

void relu_fwd_avx2(const float* x, float* y, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_acc_avx2(const float* x, const float* dy, float* dx, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 cur = _mm256_loadu_ps(dx + i);
        const __m256 sum = _mm256_add_ps(cur, _mm256_loadu_ps(dy + i));
        // blend, not add-of-masked-zero: keeps dx bits untouched where x <= 0
        _mm256_storeu_ps(dx + i, _mm256_blendv_ps(cur, sum, mask));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0f) dx[i] += dy[i];
}

void vadd_avx2(const float* a, const float* b, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

// mul+add (not fmadd) so results are bit-identical to the scalar backend
void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 av = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 prod = _mm256_mul_ps(av, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void vscale_avx2(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 av = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] = alpha * x[i];
}

bool finite_all_avx2(const float* x, std::size_t n) {
    // finite <=> exponent bits not all ones
    const __m256i exp_mask = _mm256_set1_epi32(0x7f800000);
    __m256i any_bad = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256i bits = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(x + i));
        const __m256i exp = _mm256_and_si256(bits, exp_mask);
        any_bad = _mm256_or_si256(any_bad, _mm256_cmpeq_epi32(exp, exp_mask));
        if ((i & 511) == 504 && !_mm256_testz_si256(any_bad, any_bad)) return false;
    }
    if (!_mm256_testz_si256(any_bad, any_bad)) return false;
    for (; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

// One 4-lane vector per palindromic pair:
//   lane0 = |a_i - b_i|, lane1 = |a_r - b_r|  (direct terms)
//   lane2 = |a_i - b_r|, lane3 = |a_r - b_i|  (flipped terms)
// Lane arithmetic is uniform, and lane0+lane1 / lane2+lane3 accumulate in the
// same order as the scalar pairing, so reversal invariance stays exact.
void polyline_pair_dist_avx2(const double* a, const double* b, std::size_t m,
                             double* direct_mean, double* flipped_mean) {
    double ds = 0.0, fs = 0.0;
    const std::size_t half = m / 2;
    for (std::size_t i = 0; i < half; ++i) {
        const std::size_t r = m - 1 - i;
        const double* ai = a + 3 * i;
        const double* ar = a + 3 * r;
        const double* bi = b + 3 * i;
        const double* br = b + 3 * r;
        const __m256d ax = _mm256_set_pd(ar[0], ai[0], ar[0], ai[0]);
        const __m256d ay = _mm256_set_pd(ar[1], ai[1], ar[1], ai[1]);
        const __m256d az = _mm256_set_pd(ar[2], ai[2], ar[2], ai[2]);
        const __m256d bx = _mm256_set_pd(bi[0], br[0], br[0], bi[0]);
        const __m256d by = _mm256_set_pd(bi[1], br[1], br[1], bi[1]);
        const __m256d bz = _mm256_set_pd(bi[2], br[2], br[2], bi[2]);
        const __m256d dx = _mm256_sub_pd(ax, bx);
        const __m256d dy = _mm256_sub_pd(ay, by);
        const __m256d dz = _mm256_sub_pd(az, bz);
        __m256d acc = _mm256_mul_pd(dx, dx);
        acc = _mm256_fmadd_pd(dy, dy, acc);
        acc = _mm256_fmadd_pd(dz, dz, acc);
        const __m256d dist = _mm256_sqrt_pd(acc);
        alignas(32) double d[4];
        _mm256_store_pd(d, dist);
        ds += d[0] + d[1];
        fs += d[2] + d[3];
    }
    if (m & 1) {
        const std::size_t cidx = half;
        const double* ac = a + 3 * cidx;
        const double* bc = b + 3 * cidx;
        const double dx = ac[0] - bc[0];
        const double dy = ac[1] - bc[1];
        const double dz = ac[2] - bc[2];
        const double mid = std::sqrt(dx * dx + dy * dy + dz * dz);
        ds += mid;
        fs += mid;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    *direct_mean = ds * inv_m;
    *flipped_mean = fs * inv_m;
}

}  // namespace

const Kernels& avx2() {
    static const Kernels k = {
        "avx2",
        gemm_nn_avx2, gemm_nt_avx2, gemm_tn_avx2,
        relu_fwd_avx2, relu_bwd_acc_avx2,
        vadd_avx2, axpy_avx2, vscale_avx2,
        finite_all_avx2,
        polyline_pair_dist_avx2,
    };
    return k;
}

}  // namespace tractokit::kernels
