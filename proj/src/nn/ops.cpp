#include "tractokit/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <type_traits>

#include "tractokit/nn/blas.hpp"
#include "tractokit/util/error.hpp"

namespace tractokit::nn {

namespace {

void check(bool ok, const std::string& msg) {
    if (!ok) throw InvalidInputError(msg);
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
    std::size_t n = 1;
    for (std::size_t i = from; i < to; ++i) n *= s[i];
    return n;
}

// Stable softmax of one row into p (double accumulation regardless of T).
template <typename T>
void softmax_row(const T* z, std::size_t n, double* p) {
    double m = static_cast<double>(z[0]);
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, static_cast<double>(z[i]));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp(static_cast<double>(z[i]) - m);
        sum += p[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] /= sum;
}

}  // namespace

template <typename T>
NodeId add(Graph<T>& g, NodeId a, NodeId b) {
    check(g.val(a).shape == g.val(b).shape,
          "add: shape mismatch " + shape_str(g.val(a).shape) + " vs " + shape_str(g.val(b).shape));
    Tensor<T> y = g.val(a);
    const Tensor<T>& vb = g.val(b);
    for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += vb.data[i];
    return g.make(std::move(y), {a, b}, [a, b](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        for (NodeId p : {a, b}) {
            if (!gr.needs_grad(p)) continue;
            Tensor<T>& dp = gr.grad(p);
            for (std::size_t i = 0; i < dy.numel(); ++i) dp.data[i] += dy.data[i];
        }
    });
}

template <typename T>
NodeId scale(Graph<T>& g, NodeId x, T alpha) {
    Tensor<T> y = g.val(x);
    for (T& v : y.data) v *= alpha;
    return g.make(std::move(y), {x}, [x, alpha](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] += alpha * dy.data[i];
    });
}

template <typename T>
NodeId relu(Graph<T>& g, NodeId x) {
    const Tensor<T>& vx = g.val(x);
    Tensor<T> y(vx.shape);
    if constexpr (std::is_same_v<T, float>) {
        kernels::active().relu_fwd(vx.ptr(), y.ptr(), vx.numel());
    } else {
        for (std::size_t i = 0; i < vx.numel(); ++i) y.data[i] = std::max(vx.data[i], T(0));
    }
    return g.make(std::move(y), {x}, [x](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        const Tensor<T>& vx = gr.val(x);
        Tensor<T>& dx = gr.grad(x);
        if constexpr (std::is_same_v<T, float>) {
            kernels::active().relu_bwd_acc(vx.ptr(), dy.ptr(), dx.ptr(), dy.numel());
        } else {
            for (std::size_t i = 0; i < dy.numel(); ++i)
                if (vx.data[i] > T(0)) dx.data[i] += dy.data[i];
        }
    });
}

template <typename T>
NodeId dropout(Graph<T>& g, NodeId x, double p) {
    check(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
    if (!g.training() || p == 0.0) return x;
    const Tensor<T>& vx = g.val(x);
    auto factor = std::make_shared<std::vector<T>>(vx.numel());
    const T keep = static_cast<T>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < vx.numel(); ++i)
        (*factor)[i] = g.rng().uniform_real() < p ? T(0) : keep;
    Tensor<T> y(vx.shape);
    for (std::size_t i = 0; i < vx.numel(); ++i) y.data[i] = vx.data[i] * (*factor)[i];
    return g.make(std::move(y), {x}, [x, factor](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] += dy.data[i] * (*factor)[i];
    });
}

template <typename T>
NodeId reshape(Graph<T>& g, NodeId x, Shape s) {
    check(shape_numel(s) == g.val(x).numel(),
          "reshape: numel mismatch " + shape_str(g.val(x).shape) + " -> " + shape_str(s));
    Tensor<T> y = g.val(x);
    y.shape = std::move(s);
    return g.make(std::move(y), {x}, [x](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] += dy.data[i];
    });
}

template <typename T>
NodeId transpose_12(Graph<T>& g, NodeId x) {
    const Tensor<T>& vx = g.val(x);
    check(vx.rank() == 3, "transpose_12: expected rank-3, got " + shape_str(vx.shape));
    const std::size_t B = vx.dim(0), C = vx.dim(1), N = vx.dim(2);
    Tensor<T> y(Shape{B, N, C});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t n = 0; n < N; ++n)
                y.data[(b * N + n) * C + c] = vx.data[(b * C + c) * N + n];
    return g.make(std::move(y), {x}, [x, B, C, N](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t n = 0; n < N; ++n)
                    dx.data[(b * C + c) * N + n] += dy.data[(b * N + n) * C + c];
    });
}

template <typename T>
NodeId concat(Graph<T>& g, const std::vector<NodeId>& xs, std::size_t axis) {
    check(!xs.empty(), "concat: no inputs");
    const Shape& s0 = g.val(xs[0]).shape;
    check(axis < s0.size(), "concat: axis out of range");
    Shape out = s0;
    out[axis] = 0;
    for (NodeId id : xs) {
        const Shape& s = g.val(id).shape;
        check(s.size() == s0.size(), "concat: rank mismatch");
        for (std::size_t d = 0; d < s.size(); ++d)
            check(d == axis || s[d] == s0[d], "concat: dim mismatch at axis " + std::to_string(d));
        out[axis] += s[axis];
    }
    const std::size_t outer = prod(s0, 0, axis);
    const std::size_t inner = prod(s0, axis + 1, s0.size());
    Tensor<T> y(out);
    std::size_t base = 0;
    for (NodeId id : xs) {
        const Tensor<T>& v = g.val(id);
        const std::size_t run = v.shape[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::memcpy(y.ptr() + o * out[axis] * inner + base, v.ptr() + o * run,
                        run * sizeof(T));
        base += run;
    }
    auto inputs = std::make_shared<std::vector<NodeId>>(xs);
    return g.make(std::move(y), xs,
                  [inputs, axis, outer, inner](Graph<T>& gr, NodeId self) {
                      const Tensor<T>& dy = gr.grad(self);
                      const std::size_t total = dy.shape[axis] * inner;
                      std::size_t base = 0;
                      for (NodeId id : *inputs) {
                          const std::size_t run = gr.val(id).shape[axis] * inner;
                          if (gr.needs_grad(id)) {
                              Tensor<T>& dx = gr.grad(id);
                              for (std::size_t o = 0; o < outer; ++o) {
                                  const T* src = dy.ptr() + o * total + base;
                                  T* dst = dx.ptr() + o * run;
                                  for (std::size_t i = 0; i < run; ++i) dst[i] += src[i];
                              }
                          }
                          base += run;
                      }
                  });
}

template <typename T>
NodeId weighted_sum(Graph<T>& g, NodeId x, Tensor<T> w) {
    check(w.shape == g.val(x).shape, "weighted_sum: shape mismatch");
    const Tensor<T>& vx = g.val(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < vx.numel(); ++i)
        acc += static_cast<double>(vx.data[i]) * static_cast<double>(w.data[i]);
    auto wp = std::make_shared<Tensor<T>>(std::move(w));
    return g.make(Tensor<T>::scalar(static_cast<T>(acc)), {x},
                  [x, wp](Graph<T>& gr, NodeId self) {
                      const T dy = gr.grad(self).data[0];
                      Tensor<T>& dx = gr.grad(x);
                      for (std::size_t i = 0; i < dx.numel(); ++i)
                          dx.data[i] += dy * wp->data[i];
                  });
}

template <typename T>
NodeId matmul(Graph<T>& g, NodeId a, NodeId b) {
    const Shape& sa = g.val(a).shape;
    const Shape& sb = g.val(b).shape;
    check(sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0],
          "matmul: bad shapes " + shape_str(sa) + " @ " + shape_str(sb));
    const std::size_t m = sa[0], k = sa[1], n = sb[1];
    Tensor<T> y(Shape{m, n});
    blas::mm_nn<T>(m, n, k, g.val(a).ptr(), k, g.val(b).ptr(), n, y.ptr(), n, false);
    return g.make(std::move(y), {a, b}, [a, b, m, k, n](Graph<T>& gr, NodeId self) {
        const T* dy = gr.grad(self).ptr();
        if (gr.needs_grad(a))
            blas::mm_nt<T>(m, k, n, dy, n, gr.val(b).ptr(), n, gr.grad(a).ptr(), k, true);
        if (gr.needs_grad(b))
            blas::mm_tn<T>(k, n, m, gr.val(a).ptr(), k, dy, n, gr.grad(b).ptr(), n, true);
    });
}

template <typename T>
NodeId bmm(Graph<T>& g, NodeId a, NodeId b) {
    const Shape& sa = g.val(a).shape;
    const Shape& sb = g.val(b).shape;
    check(sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1],
          "bmm: bad shapes " + shape_str(sa) + " @ " + shape_str(sb));
    const std::size_t nb = sa[0], m = sa[1], k = sa[2], n = sb[2];
    Tensor<T> y(Shape{nb, m, n});
    for (std::size_t i = 0; i < nb; ++i)
        blas::mm_nn<T>(m, n, k, g.val(a).ptr() + i * m * k, k, g.val(b).ptr() + i * k * n, n,
                       y.ptr() + i * m * n, n, false);
    return g.make(std::move(y), {a, b}, [a, b, nb, m, k, n](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        for (std::size_t i = 0; i < nb; ++i) {
            const T* dyi = dy.ptr() + i * m * n;
            if (gr.needs_grad(a))
                blas::mm_nt<T>(m, k, n, dyi, n, gr.val(b).ptr() + i * k * n, n,
                               gr.grad(a).ptr() + i * m * k, k, true);
            if (gr.needs_grad(b))
                blas::mm_tn<T>(k, n, m, gr.val(a).ptr() + i * m * k, k, dyi, n,
                               gr.grad(b).ptr() + i * k * n, n, true);
        }
    });
}

template <typename T>
NodeId maxpool2x2(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    check(s.size() == 4, "maxpool2x2: expected (B,C,H,W), got " + shape_str(s));
    const std::size_t B = s[0], C = s[1], H = s[2], W = s[3];
    const std::size_t Ho = H / 2, Wo = W / 2;
    check(Ho >= 1 && Wo >= 1, "maxpool2x2: spatial dims too small " + shape_str(s));
    Tensor<T> y(Shape{B, C, Ho, Wo});
    auto arg = std::make_shared<std::vector<std::uint32_t>>(y.numel());
    const Tensor<T>& vx = g.val(x);
    std::size_t o = 0;
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const T* plane = vx.ptr() + bc * H * W;
        for (std::size_t i = 0; i < Ho; ++i) {
            for (std::size_t j = 0; j < Wo; ++j, ++o) {
                std::size_t best = (2 * i) * W + 2 * j;
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        const std::size_t idx = (2 * i + di) * W + 2 * j + dj;
                        if (plane[idx] > plane[best]) best = idx;
                    }
                y.data[o] = plane[best];
                (*arg)[o] = static_cast<std::uint32_t>(bc * H * W + best);
            }
        }
    }
    return g.make(std::move(y), {x}, [x, arg](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[(*arg)[i]] += dy.data[i];
    });
}

template <typename T>
NodeId global_maxpool(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    check(s.size() >= 2 && s.size() <= 4, "global_maxpool: rank must be 2..4, got " + shape_str(s));
    const std::size_t lead = s.size() == 2 ? s[0] : s[0] * s[1];
    const std::size_t red = prod(s, s.size() == 2 ? 1 : 2, s.size());
    check(red >= 1 && shape_numel(s) > 0, "global_maxpool: empty input");
    Shape out = s.size() == 2 ? Shape{s[0]} : Shape{s[0], s[1]};
    Tensor<T> y(out);
    auto arg = std::make_shared<std::vector<std::uint32_t>>(lead);
    const Tensor<T>& vx = g.val(x);
    for (std::size_t l = 0; l < lead; ++l) {
        const T* row = vx.ptr() + l * red;
        std::size_t best = 0;
        for (std::size_t i = 1; i < red; ++i)
            if (row[i] > row[best]) best = i;
        y.data[l] = row[best];
        (*arg)[l] = static_cast<std::uint32_t>(l * red + best);
    }
    return g.make(std::move(y), {x}, [x, arg](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t l = 0; l < dy.numel(); ++l) dx.data[(*arg)[l]] += dy.data[l];
    });
}

namespace {

// Shared core of cross-entropy (gamma = 0) and focal loss.
template <typename T>
NodeId focal_core(Graph<T>& g, NodeId logits, const std::vector<std::uint16_t>& labels,
                  double gamma) {
    const Shape& s = g.val(logits).shape;
    check(s.size() == 2, "loss: logits must be (B,C), got " + shape_str(s));
    const std::size_t B = s[0], C = s[1];
    check(labels.size() == B, "loss: label count mismatch");
    check(gamma >= 0.0, "loss: gamma must be >= 0");
    for (std::uint16_t l : labels)
        check(l < C, "loss: label " + std::to_string(l) + " out of range [0," +
                         std::to_string(C - 1) + "]");
    auto probs = std::make_shared<std::vector<double>>(B * C);
    const Tensor<T>& vz = g.val(logits);
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double* p = probs->data() + i * C;
        softmax_row(vz.ptr() + i * C, C, p);
        const double pt = p[labels[i]];
        const double log_pt = std::log(pt);
        total += std::pow(1.0 - pt, gamma) * (-log_pt);
    }
    auto lab = std::make_shared<std::vector<std::uint16_t>>(labels);
    return g.make(Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(B))), {logits},
                  [logits, probs, lab, gamma, B, C](Graph<T>& gr, NodeId self) {
                      const double dy = static_cast<double>(gr.grad(self).data[0]);
                      Tensor<T>& dz = gr.grad(logits);
                      for (std::size_t i = 0; i < B; ++i) {
                          const double* p = probs->data() + i * C;
                          const std::size_t t = (*lab)[i];
                          const double pt = p[t];
                          const double one_m = 1.0 - pt;
                          double dLdp = -std::pow(one_m, gamma) / pt;
                          if (gamma > 0.0 && one_m > 0.0)
                              dLdp += gamma * std::pow(one_m, gamma - 1.0) * std::log(pt);
                          const double common = dy * dLdp * pt / static_cast<double>(B);
                          for (std::size_t j = 0; j < C; ++j) {
                              const double delta = j == t ? 1.0 : 0.0;
                              dz.data[i * C + j] += static_cast<T>(common * (delta - p[j]));
                          }
                      }
                  });
}

}  // namespace

template <typename T>
NodeId cross_entropy_loss(Graph<T>& g, NodeId logits, const std::vector<std::uint16_t>& labels) {
    return focal_core(g, logits, labels, 0.0);
}

template <typename T>
NodeId focal_loss(Graph<T>& g, NodeId logits, const std::vector<std::uint16_t>& labels,
                  double gamma) {
    return focal_core(g, logits, labels, gamma);
}

template <typename T>
NodeId chamfer_l1(Graph<T>& g, NodeId a, NodeId b) {
    const Shape& sa = g.val(a).shape;
    const Shape& sb = g.val(b).shape;
    check(sa.size() >= 2 && sb.size() == sa.size() && sa.back() == 3 && sb.back() == 3,
          "chamfer_l1: clouds must be (...,N,3), got " + shape_str(sa) + " and " + shape_str(sb));
    for (std::size_t d = 0; d + 2 < sa.size(); ++d)
        check(sa[d] == sb[d], "chamfer_l1: leading dims differ");
    const std::size_t na = sa[sa.size() - 2], nb = sb[sb.size() - 2];
    check(na >= 1 && nb >= 1, "chamfer_l1: empty cloud");
    const std::size_t L = prod(sa, 0, sa.size() - 2);
    const Tensor<T>& va = g.val(a);
    const Tensor<T>& vb = g.val(b);
    auto arg_a = std::make_shared<std::vector<std::uint32_t>>(L * na);  // nearest in b
    auto arg_b = std::make_shared<std::vector<std::uint32_t>>(L * nb);  // nearest in a
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const T* pa = va.ptr() + l * na * 3;
        const T* pb = vb.ptr() + l * nb * 3;
        double sum_a = 0.0, sum_b = 0.0;
        std::vector<double> best_b(nb, -1.0);
        for (std::size_t i = 0; i < na; ++i) {
            double best = -1.0;
            std::size_t bj = 0;
            for (std::size_t j = 0; j < nb; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double d = static_cast<double>(pa[i * 3 + c]) -
                                     static_cast<double>(pb[j * 3 + c]);
                    d2 += d * d;
                }
                if (best < 0.0 || d2 < best) {
                    best = d2;
                    bj = j;
                }
                if (best_b[j] < 0.0 || d2 < best_b[j]) {
                    best_b[j] = d2;
                    (*arg_b)[l * nb + j] = static_cast<std::uint32_t>(i);
                }
            }
            sum_a += std::sqrt(best);
            (*arg_a)[l * na + i] = static_cast<std::uint32_t>(bj);
        }
        for (std::size_t j = 0; j < nb; ++j) sum_b += std::sqrt(best_b[j]);
        total += sum_a / static_cast<double>(na) + sum_b / static_cast<double>(nb);
    }
    const double denom = static_cast<double>(L);
    return g.make(
        Tensor<T>::scalar(static_cast<T>(total / denom)), {a, b},
        [a, b, arg_a, arg_b, L, na, nb, denom](Graph<T>& gr, NodeId self) {
            const double dy = static_cast<double>(gr.grad(self).data[0]) / denom;
            const Tensor<T>& va = gr.val(a);
            const Tensor<T>& vb = gr.val(b);
            const bool ga = gr.needs_grad(a), gb = gr.needs_grad(b);
            Tensor<T>* da = ga ? &gr.grad(a) : nullptr;
            Tensor<T>* db = gb ? &gr.grad(b) : nullptr;
            auto pull_pair = [&](std::size_t ia, std::size_t ib, double w) {
                // w * d||p_a - p_b|| accumulated into both endpoints.
                double d[3];
                double norm = 0.0;
                for (int c = 0; c < 3; ++c) {
                    d[c] = static_cast<double>(va.data[ia * 3 + c]) -
                           static_cast<double>(vb.data[ib * 3 + c]);
                    norm += d[c] * d[c];
                }
                norm = std::sqrt(norm);
                if (norm == 0.0) return;
                for (int c = 0; c < 3; ++c) {
                    const double u = w * d[c] / norm;
                    if (da) da->data[ia * 3 + c] += static_cast<T>(u);
                    if (db) db->data[ib * 3 + c] -= static_cast<T>(u);
                }
            };
            for (std::size_t l = 0; l < L; ++l) {
                for (std::size_t i = 0; i < na; ++i)
                    pull_pair(l * na + i, l * nb + (*arg_a)[l * na + i],
                              dy / static_cast<double>(na));
                for (std::size_t j = 0; j < nb; ++j)
                    pull_pair(l * na + (*arg_b)[l * nb + j], l * nb + j,
                              dy / static_cast<double>(nb));
            }
        });
}

template <typename T>
NodeId kl_to_uniform(Graph<T>& g, NodeId logits) {
    const Shape& s = g.val(logits).shape;
    check(!s.empty() && s.back() >= 2, "kl_to_uniform: vocabulary must be >= 2");
    const std::size_t V = s.back();
    const std::size_t L = prod(s, 0, s.size() - 1);
    const Tensor<T>& vz = g.val(logits);
    auto probs = std::make_shared<std::vector<double>>(L * V);
    auto neg_ent = std::make_shared<std::vector<double>>(L);
    const double log_v = std::log(static_cast<double>(V));
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        double* p = probs->data() + l * V;
        softmax_row(vz.ptr() + l * V, V, p);
        double se = 0.0;
        for (std::size_t i = 0; i < V; ++i) se += p[i] * std::log(p[i]);
        (*neg_ent)[l] = se;
        total += std::max(0.0, log_v + se);
    }
    return g.make(Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(L))), {logits},
                  [logits, probs, neg_ent, L, V](Graph<T>& gr, NodeId self) {
                      const double dy =
                          static_cast<double>(gr.grad(self).data[0]) / static_cast<double>(L);
                      Tensor<T>& dz = gr.grad(logits);
                      for (std::size_t l = 0; l < L; ++l) {
                          const double* p = probs->data() + l * V;
                          const double se = (*neg_ent)[l];
                          for (std::size_t i = 0; i < V; ++i)
                              dz.data[l * V + i] +=
                                  static_cast<T>(dy * p[i] * (std::log(p[i]) - se));
                      }
                  });
}

template <typename T>
NodeId gumbel_softmax_sample(Graph<T>& g, NodeId logits, double tau, bool hard) {
    check(tau > 0.0, "gumbel_softmax_sample: tau must be > 0");
    const Shape& s = g.val(logits).shape;
    check(!s.empty() && s.back() >= 2, "gumbel_softmax_sample: vocabulary must be >= 2");
    const std::size_t V = s.back();
    const std::size_t L = prod(s, 0, s.size() - 1);
    const Tensor<T>& vz = g.val(logits);
    auto soft = std::make_shared<std::vector<double>>(L * V);
    Tensor<T> y(s);
    std::vector<double> noisy(V);
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t i = 0; i < V; ++i)
            noisy[i] = (static_cast<double>(vz.data[l * V + i]) + g.rng().gumbel()) / tau;
        double* p = soft->data() + l * V;
        softmax_row(noisy.data(), V, p);
        if (hard) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < V; ++i)
                if (p[i] > p[best]) best = i;
            for (std::size_t i = 0; i < V; ++i) y.data[l * V + i] = i == best ? T(1) : T(0);
        } else {
            for (std::size_t i = 0; i < V; ++i) y.data[l * V + i] = static_cast<T>(p[i]);
        }
    }
    // Straight-through: hard or soft, gradients flow through the soft sample.
    return g.make(std::move(y), {logits}, [logits, soft, tau, L, V](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dz = gr.grad(logits);
        for (std::size_t l = 0; l < L; ++l) {
            const double* p = soft->data() + l * V;
            double dot = 0.0;
            for (std::size_t i = 0; i < V; ++i)
                dot += static_cast<double>(dy.data[l * V + i]) * p[i];
            for (std::size_t i = 0; i < V; ++i)
                dz.data[l * V + i] += static_cast<T>(
                    p[i] * (static_cast<double>(dy.data[l * V + i]) - dot) / tau);
        }
    });
}

template <typename T>
NodeId hard_assign(Graph<T>& g, NodeId logits) {
    const Shape& s = g.val(logits).shape;
    check(!s.empty() && s.back() >= 1, "hard_assign: empty last axis");
    const std::size_t V = s.back();
    const std::size_t L = prod(s, 0, s.size() - 1);
    const Tensor<T>& vz = g.val(logits);
    Tensor<T> y(s);
    for (std::size_t l = 0; l < L; ++l) {
        const T* row = vz.ptr() + l * V;
        std::size_t best = 0;
        for (std::size_t i = 1; i < V; ++i)
            if (row[i] > row[best]) best = i;
        y.data[l * V + best] = T(1);
    }
    return g.make(std::move(y), {}, {});  // gradient intentionally blocked
}

#define TRACTOKIT_NN_INSTANTIATE(T)                                                         \
    template NodeId add<T>(Graph<T>&, NodeId, NodeId);                                      \
    template NodeId scale<T>(Graph<T>&, NodeId, T);                                         \
    template NodeId relu<T>(Graph<T>&, NodeId);                                             \
    template NodeId dropout<T>(Graph<T>&, NodeId, double);                                  \
    template NodeId reshape<T>(Graph<T>&, NodeId, Shape);                                   \
    template NodeId transpose_12<T>(Graph<T>&, NodeId);                                     \
    template NodeId concat<T>(Graph<T>&, const std::vector<NodeId>&, std::size_t);          \
    template NodeId weighted_sum<T>(Graph<T>&, NodeId, Tensor<T>);                          \
    template NodeId matmul<T>(Graph<T>&, NodeId, NodeId);                                   \
    template NodeId bmm<T>(Graph<T>&, NodeId, NodeId);                                      \
    template NodeId maxpool2x2<T>(Graph<T>&, NodeId);                                       \
    template NodeId global_maxpool<T>(Graph<T>&, NodeId);                                   \
    template NodeId cross_entropy_loss<T>(Graph<T>&, NodeId,                                \
                                          const std::vector<std::uint16_t>&);               \
    template NodeId focal_loss<T>(Graph<T>&, NodeId, const std::vector<std::uint16_t>&,     \
                                  double);                                                  \
    template NodeId chamfer_l1<T>(Graph<T>&, NodeId, NodeId);                               \
    template NodeId kl_to_uniform<T>(Graph<T>&, NodeId);                                    \
    template NodeId gumbel_softmax_sample<T>(Graph<T>&, NodeId, double, bool);              \
    template NodeId hard_assign<T>(Graph<T>&, NodeId);

TRACTOKIT_NN_INSTANTIATE(float)
TRACTOKIT_NN_INSTANTIATE(double)
#undef TRACTOKIT_NN_INSTANTIATE

}  // namespace tractokit::nn
