#include "tractokit/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "tractokit/nn/blas.hpp"
#include "tractokit/util/error.hpp"

namespace tractokit::nn {

namespace {

void check(bool ok, const std::string& msg) {
    if (!ok) throw InvalidInputError(msg);
}

// im2col for 3x3 same-padded convolution: one (Cin*9, H*W) matrix per sample,
// row index c*9 + ky*3 + kx.
template <typename T>
void im2col3x3(const T* x, std::size_t cin, std::size_t h, std::size_t w, T* cols) {
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                T* row = cols + (c * 9 + ky * 3 + kx) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                        std::memset(row + y * w, 0, w * sizeof(T));
                        continue;
                    }
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
                        row[y * w + xx] =
                            (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w))
                                ? T(0)
                                : x[c * hw + static_cast<std::size_t>(sy) * w +
                                    static_cast<std::size_t>(sx)];
                    }
                }
            }
        }
    }
}

// Scatter-add the im2col gradient back onto the input plane.
template <typename T>
void col2im3x3(const T* dcols, std::size_t cin, std::size_t h, std::size_t w, T* dx) {
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const T* row = dcols + (c * 9 + ky * 3 + kx) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                        dx[c * hw + static_cast<std::size_t>(sy) * w +
                           static_cast<std::size_t>(sx)] += row[y * w + xx];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
void xavier_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.numel(); ++i)
        w.data[i] = static_cast<T>(rng.uniform_range(-a, a));
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : W(name + ".W", Shape{out, in}), b(name + ".b", Shape{out}) {
    xavier_uniform(W.value, in, out, rng);
}

template <typename T>
NodeId Linear<T>::forward(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    const std::size_t out = W.value.dim(0), in = W.value.dim(1);
    check(s.size() == 2 && s[1] == in,
          "Linear " + W.name + ": expected (B," + std::to_string(in) + "), got " + shape_str(s));
    const std::size_t B = s[0];
    const NodeId wid = g.param(W);
    const NodeId bid = g.param(b);
    Tensor<T> y(Shape{B, out});
    blas::mm_nt<T>(B, out, in, g.val(x).ptr(), in, g.val(wid).ptr(), in, y.ptr(), out, false);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t o = 0; o < out; ++o) y.data[i * out + o] += g.val(bid).data[o];
    return g.make(std::move(y), {x, wid, bid},
                  [x, wid, bid, B, in, out](Graph<T>& gr, NodeId self) {
                      const T* dy = gr.grad(self).ptr();
                      if (gr.needs_grad(x))
                          blas::mm_nn<T>(B, in, out, dy, out, gr.val(wid).ptr(), in,
                                         gr.grad(x).ptr(), in, true);
                      if (gr.needs_grad(wid))
                          blas::mm_tn<T>(out, in, B, dy, out, gr.val(x).ptr(), in,
                                         gr.grad(wid).ptr(), in, true);
                      if (gr.needs_grad(bid)) {
                          Tensor<T>& db = gr.grad(bid);
                          for (std::size_t i = 0; i < B; ++i)
                              for (std::size_t o = 0; o < out; ++o)
                                  db.data[o] += dy[i * out + o];
                      }
                  });
}

template <typename T>
void Linear<T>::params(std::vector<Parameter<T>*>& out) {
    out.push_back(&W);
    out.push_back(&b);
}

template <typename T>
void Linear<T>::state(std::vector<NamedTensor<T>>& out) {
    out.push_back({W.name, &W.value});
    out.push_back({b.name, &b.value});
}

// ---------------------------------------------------------------- Conv2D

template <typename T>
Conv2D<T>::Conv2D(const std::string& name, std::size_t cin_, std::size_t cout_, Rng& rng)
    : cin(cin_), cout(cout_), W(name + ".W", Shape{cout_, cin_ * 9}), b(name + ".b", Shape{cout_}) {
    xavier_uniform(W.value, cin * 9, cout * 9, rng);
}

template <typename T>
NodeId Conv2D<T>::forward(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    check(s.size() == 4 && s[1] == cin,
          "Conv2D " + W.name + ": expected (B," + std::to_string(cin) + ",H,W), got " +
              shape_str(s));
    const std::size_t B = s[0], H = s[2], Wd = s[3], hw = H * Wd, k9 = cin * 9;
    const NodeId wid = g.param(W);
    const NodeId bid = g.param(b);
    Tensor<T> y(Shape{B, cout, H, Wd});
    std::vector<T> cols(k9 * hw);
    for (std::size_t i = 0; i < B; ++i) {
        im2col3x3(g.val(x).ptr() + i * cin * hw, cin, H, Wd, cols.data());
        T* yi = y.ptr() + i * cout * hw;
        blas::mm_nn<T>(cout, hw, k9, g.val(wid).ptr(), k9, cols.data(), hw, yi, hw, false);
        for (std::size_t o = 0; o < cout; ++o) {
            const T bo = g.val(bid).data[o];
            for (std::size_t p = 0; p < hw; ++p) yi[o * hw + p] += bo;
        }
    }
    const std::size_t cin_ = cin, cout_ = cout;
    return g.make(std::move(y), {x, wid, bid},
                  [x, wid, bid, B, H, Wd, cin_, cout_](Graph<T>& gr, NodeId self) {
                      const std::size_t hw = H * Wd, k9 = cin_ * 9;
                      const Tensor<T>& dy = gr.grad(self);
                      std::vector<T> cols(k9 * hw), dcols(k9 * hw);
                      for (std::size_t i = 0; i < B; ++i) {
                          const T* dyi = dy.ptr() + i * cout_ * hw;
                          if (gr.needs_grad(wid) || gr.needs_grad(bid))
                              im2col3x3(gr.val(x).ptr() + i * cin_ * hw, cin_, H, Wd,
                                        cols.data());
                          if (gr.needs_grad(wid))
                              blas::mm_nt<T>(cout_, k9, hw, dyi, hw, cols.data(), hw,
                                             gr.grad(wid).ptr(), k9, true);
                          if (gr.needs_grad(bid)) {
                              Tensor<T>& db = gr.grad(bid);
                              for (std::size_t o = 0; o < cout_; ++o)
                                  for (std::size_t p = 0; p < hw; ++p)
                                      db.data[o] += dyi[o * hw + p];
                          }
                          if (gr.needs_grad(x)) {
                              blas::mm_tn<T>(k9, hw, cout_, gr.val(wid).ptr(), k9, dyi, hw,
                                             dcols.data(), hw, false);
                              col2im3x3(dcols.data(), cin_, H, Wd,
                                        gr.grad(x).ptr() + i * cin_ * hw);
                          }
                      }
                  });
}

template <typename T>
void Conv2D<T>::params(std::vector<Parameter<T>*>& out) {
    out.push_back(&W);
    out.push_back(&b);
}

template <typename T>
void Conv2D<T>::state(std::vector<NamedTensor<T>>& out) {
    out.push_back({W.name, &W.value});
    out.push_back({b.name, &b.value});
}

// ---------------------------------------------------------------- Conv1D

template <typename T>
Conv1D<T>::Conv1D(const std::string& name, std::size_t cin_, std::size_t cout_, Rng& rng)
    : cin(cin_), cout(cout_), W(name + ".W", Shape{cout_, cin_}), b(name + ".b", Shape{cout_}) {
    xavier_uniform(W.value, cin, cout, rng);
}

template <typename T>
NodeId Conv1D<T>::forward(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    check(s.size() == 3 && s[1] == cin,
          "Conv1D " + W.name + ": expected (B," + std::to_string(cin) + ",N), got " +
              shape_str(s));
    const std::size_t B = s[0], N = s[2];
    const NodeId wid = g.param(W);
    const NodeId bid = g.param(b);
    Tensor<T> y(Shape{B, cout, N});
    for (std::size_t i = 0; i < B; ++i) {
        T* yi = y.ptr() + i * cout * N;
        blas::mm_nn<T>(cout, N, cin, g.val(wid).ptr(), cin, g.val(x).ptr() + i * cin * N, N,
                       yi, N, false);
        for (std::size_t o = 0; o < cout; ++o) {
            const T bo = g.val(bid).data[o];
            for (std::size_t n = 0; n < N; ++n) yi[o * N + n] += bo;
        }
    }
    const std::size_t cin_ = cin, cout_ = cout;
    return g.make(std::move(y), {x, wid, bid},
                  [x, wid, bid, B, N, cin_, cout_](Graph<T>& gr, NodeId self) {
                      const Tensor<T>& dy = gr.grad(self);
                      for (std::size_t i = 0; i < B; ++i) {
                          const T* dyi = dy.ptr() + i * cout_ * N;
                          if (gr.needs_grad(wid))
                              blas::mm_nt<T>(cout_, cin_, N, dyi, N,
                                             gr.val(x).ptr() + i * cin_ * N, N,
                                             gr.grad(wid).ptr(), cin_, true);
                          if (gr.needs_grad(x))
                              blas::mm_tn<T>(cin_, N, cout_, gr.val(wid).ptr(), cin_, dyi, N,
                                             gr.grad(x).ptr() + i * cin_ * N, N, true);
                          if (gr.needs_grad(bid)) {
                              Tensor<T>& db = gr.grad(bid);
                              for (std::size_t o = 0; o < cout_; ++o)
                                  for (std::size_t n = 0; n < N; ++n)
                                      db.data[o] += dyi[o * N + n];
                          }
                      }
                  });
}

template <typename T>
void Conv1D<T>::params(std::vector<Parameter<T>*>& out) {
    out.push_back(&W);
    out.push_back(&b);
}

template <typename T>
void Conv1D<T>::state(std::vector<NamedTensor<T>>& out) {
    out.push_back({W.name, &W.value});
    out.push_back({b.name, &b.value});
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(const std::string& name, std::size_t c, double eps_, double momentum_)
    : channels(c),
      eps(eps_),
      momentum(momentum_),
      gamma(name + ".gamma", Shape{c}),
      beta(name + ".beta", Shape{c}),
      running_mean(Shape{c}),
      running_var(Shape{c}, T(1)),
      name_(name) {
    gamma.value.fill(T(1));
}

template <typename T>
NodeId BatchNorm<T>::forward(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    check((s.size() == 2 || s.size() == 3) && s[1] == channels,
          "BatchNorm " + name_ + ": expected (B," + std::to_string(channels) +
              "[,N]), got " + shape_str(s));
    const std::size_t B = s[0], C = channels, N = s.size() == 3 ? s[2] : 1;
    const std::size_t M = B * N;
    const NodeId gid = g.param(gamma);
    const NodeId bid = g.param(beta);
    const Tensor<T>& vx = g.val(x);
    Tensor<T> y(s);

    auto xhat = std::make_shared<std::vector<T>>(vx.numel());
    auto inv_std = std::make_shared<std::vector<T>>(C);

    if (g.training()) {
        for (std::size_t c = 0; c < C; ++c) {
            double mu = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t n = 0; n < N; ++n)
                    mu += static_cast<double>(vx.data[(b * C + c) * N + n]);
            mu /= static_cast<double>(M);
            double var = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t n = 0; n < N; ++n) {
                    const double d =
                        static_cast<double>(vx.data[(b * C + c) * N + n]) - mu;
                    var += d * d;
                }
            var /= static_cast<double>(M);
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_std)[c] = static_cast<T>(is);
            const double gm = static_cast<double>(g.val(gid).data[c]);
            const double bt = static_cast<double>(g.val(bid).data[c]);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t n = 0; n < N; ++n) {
                    const std::size_t i = (b * C + c) * N + n;
                    const double xh = (static_cast<double>(vx.data[i]) - mu) * is;
                    (*xhat)[i] = static_cast<T>(xh);
                    y.data[i] = static_cast<T>(gm * xh + bt);
                }
            const double unbiased = M > 1 ? var * static_cast<double>(M) /
                                                static_cast<double>(M - 1)
                                          : var;
            running_mean.data[c] = static_cast<T>(
                (1.0 - momentum) * static_cast<double>(running_mean.data[c]) + momentum * mu);
            running_var.data[c] = static_cast<T>(
                (1.0 - momentum) * static_cast<double>(running_var.data[c]) +
                momentum * unbiased);
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            const double mu = static_cast<double>(running_mean.data[c]);
            const double is =
                1.0 / std::sqrt(static_cast<double>(running_var.data[c]) + eps);
            (*inv_std)[c] = static_cast<T>(is);
            const double gm = static_cast<double>(g.val(gid).data[c]);
            const double bt = static_cast<double>(g.val(bid).data[c]);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t n = 0; n < N; ++n) {
                    const std::size_t i = (b * C + c) * N + n;
                    const double xh = (static_cast<double>(vx.data[i]) - mu) * is;
                    (*xhat)[i] = static_cast<T>(xh);
                    y.data[i] = static_cast<T>(gm * xh + bt);
                }
        }
    }

    const bool train = g.training();
    return g.make(
        std::move(y), {x, gid, bid},
        [x, gid, bid, B, C, N, xhat, inv_std, train](Graph<T>& gr, NodeId self) {
            const std::size_t M = B * N;
            const Tensor<T>& dy = gr.grad(self);
            for (std::size_t c = 0; c < C; ++c) {
                double sum_dy = 0.0, sum_dy_xh = 0.0;
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t n = 0; n < N; ++n) {
                        const std::size_t i = (b * C + c) * N + n;
                        sum_dy += static_cast<double>(dy.data[i]);
                        sum_dy_xh += static_cast<double>(dy.data[i]) *
                                     static_cast<double>((*xhat)[i]);
                    }
                if (gr.needs_grad(gid))
                    gr.grad(gid).data[c] += static_cast<T>(sum_dy_xh);
                if (gr.needs_grad(bid)) gr.grad(bid).data[c] += static_cast<T>(sum_dy);
                if (!gr.needs_grad(x)) continue;
                const double gm = static_cast<double>(gr.val(gid).data[c]);
                const double is = static_cast<double>((*inv_std)[c]);
                Tensor<T>& dx = gr.grad(x);
                if (train) {
                    const double mean_dy = sum_dy / static_cast<double>(M);
                    const double mean_dy_xh = sum_dy_xh / static_cast<double>(M);
                    for (std::size_t b = 0; b < B; ++b)
                        for (std::size_t n = 0; n < N; ++n) {
                            const std::size_t i = (b * C + c) * N + n;
                            dx.data[i] += static_cast<T>(
                                gm * is *
                                (static_cast<double>(dy.data[i]) - mean_dy -
                                 static_cast<double>((*xhat)[i]) * mean_dy_xh));
                        }
                } else {
                    for (std::size_t b = 0; b < B; ++b)
                        for (std::size_t n = 0; n < N; ++n) {
                            const std::size_t i = (b * C + c) * N + n;
                            dx.data[i] +=
                                static_cast<T>(gm * is * static_cast<double>(dy.data[i]));
                        }
                }
            }
        });
}

template <typename T>
void BatchNorm<T>::params(std::vector<Parameter<T>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

template <typename T>
void BatchNorm<T>::state(std::vector<NamedTensor<T>>& out) {
    out.push_back({gamma.name, &gamma.value});
    out.push_back({beta.name, &beta.value});
    out.push_back({name_ + ".running_mean", &running_mean});
    out.push_back({name_ + ".running_var", &running_var});
}

// ---------------------------------------------------------------- STNkD

template <typename T>
STNkD<T>::STNkD(const std::string& name, std::size_t k_, std::size_t base, Rng& rng)
    : k(k_),
      c1(name + ".c1", k_, base, rng),
      c2(name + ".c2", base, 2 * base, rng),
      c3(name + ".c3", 2 * base, 16 * base, rng),
      bn1(name + ".bn1", base),
      bn2(name + ".bn2", 2 * base),
      bn3(name + ".bn3", 16 * base),
      bn4(name + ".bn4", 8 * base),
      bn5(name + ".bn5", 4 * base),
      f1(name + ".f1", 16 * base, 8 * base, rng),
      f2(name + ".f2", 8 * base, 4 * base, rng),
      f3(name + ".f3", 4 * base, k_ * k_, rng) {
    // Zero the regression head so the transform starts at the identity
    // (identity offset added in transform()).
    f3.W.value.fill(T(0));
}

template <typename T>
NodeId STNkD<T>::transform(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    check(s.size() == 3 && s[1] == k,
          "STNkD: expected (B," + std::to_string(k) + ",N), got " + shape_str(s));
    const std::size_t B = s[0];
    NodeId h = relu(g, bn1.forward(g, c1.forward(g, x)));
    h = relu(g, bn2.forward(g, c2.forward(g, h)));
    h = relu(g, bn3.forward(g, c3.forward(g, h)));
    h = global_maxpool(g, h);
    h = relu(g, bn4.forward(g, f1.forward(g, h)));
    h = relu(g, bn5.forward(g, f2.forward(g, h)));
    h = f3.forward(g, h);
    Tensor<T> eye(Shape{B, k * k});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < k; ++i) eye.data[b * k * k + i * k + i] = T(1);
    h = add(g, h, g.input(std::move(eye)));
    return reshape(g, h, Shape{B, k, k});
}

template <typename T>
NodeId STNkD<T>::forward(Graph<T>& g, NodeId x) {
    return bmm(g, transform(g, x), x);
}

template <typename T>
void STNkD<T>::params(std::vector<Parameter<T>*>& out) {
    c1.params(out);
    c2.params(out);
    c3.params(out);
    bn1.params(out);
    bn2.params(out);
    bn3.params(out);
    bn4.params(out);
    bn5.params(out);
    f1.params(out);
    f2.params(out);
    f3.params(out);
}

template <typename T>
void STNkD<T>::state(std::vector<NamedTensor<T>>& out) {
    c1.state(out);
    c2.state(out);
    c3.state(out);
    bn1.state(out);
    bn2.state(out);
    bn3.state(out);
    bn4.state(out);
    bn5.state(out);
    f1.state(out);
    f2.state(out);
    f3.state(out);
}

// ---------------------------------------------------------------- EdgeConv

template <typename T>
std::vector<std::uint32_t> knn_feature_graph(const Tensor<T>& x, std::size_t k) {
    check(x.rank() == 3, "knn_feature_graph: expected (B,C,N)");
    const std::size_t B = x.dim(0), C = x.dim(1), N = x.dim(2);
    check(k >= 1 && k <= N, "knn_feature_graph: k must be in [1,N]");
    std::vector<std::uint32_t> idx(B * N * k);
    std::vector<T> gram(N * N);
    for (std::size_t b = 0; b < B; ++b) {
        const T* xb = x.ptr() + b * C * N;
        blas::mm_tn<T>(N, N, C, xb, N, xb, N, gram.data(), N, false);
        for (std::size_t i = 0; i < N; ++i) {
            // Maintain the k smallest squared distances by insertion.
            std::uint32_t* out = idx.data() + (b * N + i) * k;
            std::vector<double> dist(k, 0.0);
            std::size_t filled = 0;
            const double ni = static_cast<double>(gram[i * N + i]);
            for (std::size_t j = 0; j < N; ++j) {
                const double d = ni + static_cast<double>(gram[j * N + j]) -
                                 2.0 * static_cast<double>(gram[i * N + j]);
                std::size_t pos = filled;
                while (pos > 0 &&
                       (dist[pos - 1] > d ||
                        (dist[pos - 1] == d && out[pos - 1] > j)))
                    --pos;
                if (pos >= k) continue;
                const std::size_t last = std::min(filled, k - 1);
                for (std::size_t t = last; t > pos; --t) {
                    dist[t] = dist[t - 1];
                    out[t] = out[t - 1];
                }
                dist[pos] = d;
                out[pos] = static_cast<std::uint32_t>(j);
                if (filled < k) ++filled;
            }
        }
    }
    return idx;
}

template <typename T>
NodeId edge_features(Graph<T>& g, NodeId x, std::vector<std::uint32_t> idx, std::size_t k) {
    const Shape& s = g.val(x).shape;
    check(s.size() == 3, "edge_features: expected (B,C,N)");
    const std::size_t B = s[0], C = s[1], N = s[2];
    check(idx.size() == B * N * k, "edge_features: index table size mismatch");
    const Tensor<T>& vx = g.val(x);
    Tensor<T> e(Shape{B, 2 * C, N * k});
    for (std::size_t b = 0; b < B; ++b) {
        const T* xb = vx.ptr() + b * C * N;
        T* eb = e.ptr() + b * 2 * C * N * k;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t t = 0; t < k; ++t) {
                const std::size_t j = idx[(b * N + i) * k + t];
                for (std::size_t c = 0; c < C; ++c) {
                    const T xi = xb[c * N + i];
                    eb[c * N * k + i * k + t] = xb[c * N + j] - xi;
                    eb[(C + c) * N * k + i * k + t] = xi;
                }
            }
        }
    }
    auto ip = std::make_shared<std::vector<std::uint32_t>>(std::move(idx));
    return g.make(std::move(e), {x}, [x, ip, k, B, C, N](Graph<T>& gr, NodeId self) {
        const Tensor<T>& de = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t b = 0; b < B; ++b) {
            const T* deb = de.ptr() + b * 2 * C * N * k;
            T* dxb = dx.ptr() + b * C * N;
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t t = 0; t < k; ++t) {
                    const std::size_t j = (*ip)[(b * N + i) * k + t];
                    for (std::size_t c = 0; c < C; ++c) {
                        const T d1 = deb[c * N * k + i * k + t];
                        const T d2 = deb[(C + c) * N * k + i * k + t];
                        dxb[c * N + j] += d1;
                        dxb[c * N + i] += d2 - d1;
                    }
                }
            }
        }
    });
}

template <typename T>
NodeId group_max(Graph<T>& g, NodeId x, std::size_t k) {
    const Shape& s = g.val(x).shape;
    check(s.size() == 3 && k >= 1 && s[2] % k == 0,
          "group_max: expected (B,C,N*k), got " + shape_str(s));
    const std::size_t B = s[0], C = s[1], N = s[2] / k;
    const Tensor<T>& vx = g.val(x);
    Tensor<T> y(Shape{B, C, N});
    auto arg = std::make_shared<std::vector<std::uint32_t>>(B * C * N);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const T* row = vx.ptr() + bc * N * k;
        for (std::size_t i = 0; i < N; ++i) {
            std::size_t best = i * k;
            for (std::size_t t = 1; t < k; ++t)
                if (row[i * k + t] > row[best]) best = i * k + t;
            y.data[bc * N + i] = row[best];
            (*arg)[bc * N + i] = static_cast<std::uint32_t>(bc * N * k + best);
        }
    }
    return g.make(std::move(y), {x}, [x, arg](Graph<T>& gr, NodeId self) {
        const Tensor<T>& dy = gr.grad(self);
        Tensor<T>& dx = gr.grad(x);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[(*arg)[i]] += dy.data[i];
    });
}

template <typename T>
EdgeConv<T>::EdgeConv(const std::string& name, std::size_t cin_, std::size_t cout_,
                      std::size_t k_, Rng& rng)
    : cin(cin_),
      cout(cout_),
      k(k_),
      lin1(name + ".lin1", 2 * cin_, cout_, rng),
      lin2(name + ".lin2", cout_, cout_, rng) {}

template <typename T>
NodeId EdgeConv<T>::forward(Graph<T>& g, NodeId x) {
    const Shape& s = g.val(x).shape;
    check(s.size() == 3 && s[1] == cin,
          "EdgeConv " + lin1.W.name + ": expected (B," + std::to_string(cin) + ",N), got " +
              shape_str(s));
    auto idx = knn_feature_graph(g.val(x), k);
    NodeId e = edge_features(g, x, std::move(idx), k);
    NodeId h = relu(g, lin1.forward(g, e));
    h = relu(g, lin2.forward(g, h));
    return group_max(g, h, k);
}

template <typename T>
void EdgeConv<T>::params(std::vector<Parameter<T>*>& out) {
    lin1.params(out);
    lin2.params(out);
}

template <typename T>
void EdgeConv<T>::state(std::vector<NamedTensor<T>>& out) {
    lin1.state(out);
    lin2.state(out);
}

#define TRACTOKIT_NN_LAYER_INSTANTIATE(T)                                                   \
    template void xavier_uniform<T>(Tensor<T>&, std::size_t, std::size_t, Rng&);            \
    template class Linear<T>;                                                               \
    template class Conv2D<T>;                                                               \
    template class Conv1D<T>;                                                               \
    template class BatchNorm<T>;                                                            \
    template class STNkD<T>;                                                                \
    template class EdgeConv<T>;                                                             \
    template std::vector<std::uint32_t> knn_feature_graph<T>(const Tensor<T>&, std::size_t); \
    template NodeId edge_features<T>(Graph<T>&, NodeId, std::vector<std::uint32_t>,         \
                                     std::size_t);                                          \
    template NodeId group_max<T>(Graph<T>&, NodeId, std::size_t);

TRACTOKIT_NN_LAYER_INSTANTIATE(float)
TRACTOKIT_NN_LAYER_INSTANTIATE(double)
#undef TRACTOKIT_NN_LAYER_INSTANTIATE

}  // namespace tractokit::nn
