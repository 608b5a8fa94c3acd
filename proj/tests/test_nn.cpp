#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <unistd.h>
#include <vector>

#include <doctest.h>

#include "tractokit/nn/checkpoint.hpp"
#include "tractokit/nn/gradcheck.hpp"
#include "tractokit/nn/graph.hpp"
#include "tractokit/nn/layers.hpp"
#include "tractokit/nn/ops.hpp"
#include "tractokit/nn/optim.hpp"
#include "tractokit/util/binio.hpp"
#include "tractokit/util/error.hpp"
#include "tractokit/util/rng.hpp"

using namespace tractokit;
using namespace tractokit::nn;

namespace {

template <typename T>
Tensor<T> rand_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(s));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform_range(lo, hi));
    return t;
}

template <typename T>
Parameter<T> rand_param(const std::string& name, Shape s, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
    Parameter<T> p(name, std::move(s));
    for (auto& v : p.value.data) v = static_cast<T>(rng.uniform_range(lo, hi));
    return p;
}

std::string tmp_path(const std::string& stem) {
    return "/tmp/tractokit_nn_" + stem + "_" + std::to_string(::getpid());
}

}  // namespace

TEST_CASE("graph: linear-case gradient and backward contracts") {
    // loss = sum of W @ x has dW[i][j] = x[j] in every row.
    Graph<double> g(Mode::kTrain, 0);
    Parameter<double> W("W", Shape{3, 4});
    Rng rng(7);
    for (auto& v : W.value.data) v = rng.uniform_range(-1, 1);
    Tensor<double> x(Shape{4, 1});
    for (std::size_t i = 0; i < 4; ++i) x.data[i] = 0.5 + static_cast<double>(i);

    NodeId y = matmul(g, g.param(W), g.input(x));
    NodeId loss = weighted_sum(g, y, Tensor<double>(Shape{3, 1}, 1.0));
    auto touched = g.backward(loss);

    REQUIRE(touched.size() == 1);
    CHECK(touched[0] == &W);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(W.grad.data[i * 4 + j] == doctest::Approx(x.data[j]).epsilon(1e-12));

    SUBCASE("backward twice is rejected") {
        CHECK_THROWS_AS((void)g.backward(loss), InvalidInputError);
    }
}

TEST_CASE("graph: backward on a non-scalar is rejected") {
    Graph<float> g(Mode::kTrain, 0);
    Parameter<float> W("W", Shape{2, 2});
    W.value.fill(1.0f);
    NodeId y = scale(g, g.param(W), 2.0f);
    CHECK_THROWS_AS((void)g.backward(y), InvalidInputError);
}

TEST_CASE("graph: non-finite values trip a numeric error") {
    Graph<float> g(Mode::kTrain, 0);
    Tensor<float> bad(Shape{3});
    bad.data[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS((void)g.input(bad), NumericError);

    Tensor<float> inf(Shape{2});
    inf.data[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS((void)g.input(inf), NumericError);
}

TEST_CASE("graph: frozen parameters receive no gradient") {
    Parameter<float> a("a", Shape{2});
    Parameter<float> b("b", Shape{2});
    a.value.fill(1.0f);
    b.value.fill(2.0f);
    b.freeze(true);
    CHECK(!b.value.requires_grad);

    Graph<float> g(Mode::kTrain, 0);
    NodeId sum = add(g, g.param(a), g.param(b));
    NodeId loss = weighted_sum(g, sum, Tensor<float>(Shape{2}, 1.0f));
    auto touched = g.backward(loss);

    REQUIRE(touched.size() == 1);
    CHECK(touched[0] == &a);
    CHECK(a.grad.data[0] == 1.0f);
    CHECK(b.grad.data[0] == 0.0f);
    CHECK(b.grad.data[1] == 0.0f);
}

TEST_CASE("relu forward oracle") {
    Graph<float> g(Mode::kEval, 0);
    Tensor<float> x(Shape{3});
    x.data = {-1.0f, 0.0f, 2.0f};
    const Tensor<float>& y = g.val(relu(g, g.input(x)));
    CHECK(y.data == std::vector<float>{0.0f, 0.0f, 2.0f});
}

TEST_CASE("global max pool reduces per channel and ignores point order") {
    Rng rng(3);
    SUBCASE("rank 2: (C,N) -> (C,)") {
        Graph<float> g(Mode::kEval, 0);
        Tensor<float> x(Shape{2, 4});
        x.data = {1, 5, 2, 3, -7, -1, -9, -4};
        const Tensor<float>& y = g.val(global_maxpool(g, g.input(x)));
        CHECK(y.shape == Shape{2});
        CHECK(y.data == std::vector<float>{5, -1});
    }
    SUBCASE("rank 3 exact permutation invariance") {
        Tensor<float> x = rand_tensor<float>({2, 5, 7}, rng);
        Tensor<float> xp(Shape{2, 5, 7});
        std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t c = 0; c < 5; ++c)
                for (std::size_t n = 0; n < 7; ++n)
                    xp.data[(b * 5 + c) * 7 + n] = x.data[(b * 5 + c) * 7 + perm[n]];
        Graph<float> g(Mode::kEval, 0);
        const Tensor<float>& a = g.val(global_maxpool(g, g.input(x)));
        const Tensor<float>& b = g.val(global_maxpool(g, g.input(xp)));
        CHECK(a.shape == Shape{2, 5});
        CHECK(a.data == b.data);
    }
    SUBCASE("rank 4 reduces the whole spatial grid") {
        Tensor<float> x = rand_tensor<float>({2, 3, 4, 5}, rng);
        Graph<float> g(Mode::kEval, 0);
        const Tensor<float>& y = g.val(global_maxpool(g, g.input(x)));
        CHECK(y.shape == Shape{2, 3});
        for (std::size_t bc = 0; bc < 6; ++bc) {
            float m = x.data[bc * 20];
            for (std::size_t i = 1; i < 20; ++i) m = std::max(m, x.data[bc * 20 + i]);
            CHECK(y.data[bc] == m);
        }
    }
}

TEST_CASE("maxpool2x2 halves spatial dims with floor and picks window maxima") {
    Graph<float> g(Mode::kEval, 0);
    Tensor<float> x(Shape{1, 1, 3, 5});
    x.data = {1, 2, 3, 4, 9,      //
              5, 6, 7, 8, 9,      //
              0, 0, 0, 0, 9};     // odd row/col tails are dropped
    const Tensor<float>& y = g.val(maxpool2x2(g, g.input(x)));
    CHECK(y.shape == Shape{1, 1, 1, 2});
    CHECK(y.data == std::vector<float>{6, 8});
}

TEST_CASE("dropout: identity in eval, seeded inverted mask in train") {
    Rng rng(11);
    Tensor<float> x = rand_tensor<float>({40, 25}, rng, 0.5, 1.5);
    SUBCASE("eval mode returns the input unchanged") {
        Graph<float> g(Mode::kEval, 5);
        NodeId xid = g.input(x);
        CHECK(dropout(g, xid, 0.5) == xid);
    }
    SUBCASE("train mode zeroes about p and rescales the rest") {
        Graph<float> g(Mode::kTrain, 5);
        const Tensor<float>& y = g.val(dropout(g, g.input(x), 0.5));
        std::size_t zeros = 0;
        for (std::size_t i = 0; i < y.numel(); ++i) {
            if (y.data[i] == 0.0f)
                ++zeros;
            else
                CHECK(y.data[i] == doctest::Approx(2.0f * x.data[i]));
        }
        const double frac = static_cast<double>(zeros) / static_cast<double>(y.numel());
        CHECK(frac > 0.4);
        CHECK(frac < 0.6);

        Graph<float> g2(Mode::kTrain, 5);
        CHECK(g2.val(dropout(g2, g2.input(x), 0.5)).data == y.data);
        Graph<float> g3(Mode::kTrain, 6);
        CHECK(g3.val(dropout(g3, g3.input(x), 0.5)).data != y.data);
    }
    SUBCASE("p outside [0,1) is rejected") {
        Graph<float> g(Mode::kTrain, 0);
        NodeId xid = g.input(x);
        CHECK_THROWS_AS((void)dropout(g, xid, 1.0), InvalidInputError);
        CHECK_THROWS_AS((void)dropout(g, xid, -0.1), InvalidInputError);
    }
}

TEST_CASE("layer shape contracts reject mismatched input") {
    Rng rng(0);
    Graph<float> g(Mode::kEval, 0);
    Linear<float> lin("lin", 4, 2, rng);
    Conv2D<float> c2("c2", 3, 8, rng);
    Conv1D<float> c1("c1", 3, 8, rng);
    BatchNorm<float> bn("bn", 4);
    NodeId bad = g.input(rand_tensor<float>({2, 5}, rng));
    CHECK_THROWS_AS((void)lin.forward(g, bad), InvalidInputError);
    CHECK_THROWS_AS((void)c2.forward(g, bad), InvalidInputError);
    CHECK_THROWS_AS((void)c1.forward(g, bad), InvalidInputError);
    CHECK_THROWS_AS((void)bn.forward(g, bad), InvalidInputError);
}

TEST_CASE("gradcheck: linear, conv, pooling and structural ops") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed * 101 + 13);
        const std::size_t B = 2 + rng.uniform_index(2);
        {
            // Linear
            const std::size_t in = 3 + rng.uniform_index(3), out = 2 + rng.uniform_index(3);
            Rng init(seed);
            Linear<double> lin("lin", in, out, init);
            auto x = rand_param<double>("x", {B, in}, rng);
            Tensor<double> w = rand_tensor<double>({B, out}, rng);
            auto rep = check_gradients(
                {&lin.W, &lin.b, &x},
                [&](Graph<double>& g) {
                    return weighted_sum(g, lin.forward(g, g.param(x)), w);
                },
                Mode::kTrain, seed);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
        {
            // Conv2D (3x3 same padding) -> relu -> maxpool -> global pool
            const std::size_t cin = 1 + rng.uniform_index(2), cout = 2 + rng.uniform_index(2);
            const std::size_t H = 4 + rng.uniform_index(2), W = 4 + rng.uniform_index(2);
            Rng init(seed);
            Conv2D<double> conv("conv", cin, cout, init);
            auto x = rand_param<double>("x", {B, cin, H, W}, rng);
            Tensor<double> w = rand_tensor<double>({B, cout}, rng);
            auto rep = check_gradients(
                {&conv.W, &conv.b, &x},
                [&](Graph<double>& g) {
                    NodeId h = relu(g, conv.forward(g, g.param(x)));
                    return weighted_sum(g, global_maxpool(g, maxpool2x2(g, h)), w);
                },
                Mode::kTrain, seed);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
        {
            // Conv1D pointwise
            const std::size_t cin = 2 + rng.uniform_index(2), cout = 2 + rng.uniform_index(3);
            const std::size_t N = 4 + rng.uniform_index(3);
            Rng init(seed);
            Conv1D<double> conv("pw", cin, cout, init);
            auto x = rand_param<double>("x", {B, cin, N}, rng);
            Tensor<double> w = rand_tensor<double>({B, cout, N}, rng);
            auto rep = check_gradients(
                {&conv.W, &conv.b, &x},
                [&](Graph<double>& g) {
                    return weighted_sum(g, conv.forward(g, g.param(x)), w);
                },
                Mode::kTrain, seed);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
        {
            // add / scale / concat / reshape / bmm composite
            const std::size_t M = 2 + rng.uniform_index(2), K = 2 + rng.uniform_index(2);
            auto a = rand_param<double>("a", {B, M, K}, rng);
            auto b = rand_param<double>("b", {B, K, M}, rng);
            Tensor<double> w = rand_tensor<double>({B, 2 * M * M}, rng);
            auto rep = check_gradients(
                {&a, &b},
                [&](Graph<double>& g) {
                    NodeId p = bmm(g, g.param(a), g.param(b));  // (B,M,M)
                    NodeId q = scale(g, p, 0.7);
                    NodeId cat = concat(g, {p, q}, 1);  // (B,2M,M)
                    NodeId flat = reshape(g, cat, Shape{B, 2 * M * M});
                    return weighted_sum(g, flat, w);
                },
                Mode::kTrain, seed);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
        {
            // dropout in train mode (stochastic but seed-frozen)
            auto x = rand_param<double>("x", {B, 6}, rng, 0.5, 1.5);
            Tensor<double> w = rand_tensor<double>({B, 6}, rng);
            auto rep = check_gradients(
                {&x},
                [&](Graph<double>& g) {
                    return weighted_sum(g, dropout(g, g.param(x), 0.4), w);
                },
                Mode::kTrain, seed);
            CHECK(rep.pass());
        }
    }
}

TEST_CASE("gradcheck: batch norm in both modes") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed * 31 + 5);
        const std::size_t B = 2 + rng.uniform_index(2), C = 2 + rng.uniform_index(2);
        const std::size_t N = 3 + rng.uniform_index(3);
        BatchNorm<double> bn("bn", C);
        Rng pr(seed);
        for (auto& v : bn.gamma.value.data) v = pr.uniform_range(0.5, 1.5);
        for (auto& v : bn.beta.value.data) v = pr.uniform_range(-0.5, 0.5);
        auto x = rand_param<double>("x", {B, C, N}, rng);
        Tensor<double> w = rand_tensor<double>({B, C, N}, rng);
        auto build = [&](Graph<double>& g) {
            return weighted_sum(g, bn.forward(g, g.param(x)), w);
        };
        auto train_rep = check_gradients({&bn.gamma, &bn.beta, &x}, build, Mode::kTrain, seed);
        CHECK(train_rep.pass());
        CHECK(train_rep.max_abs_grad > 0.0);
        // seed the running stats away from the identity, then check eval
        for (auto& v : bn.running_mean.data) v = pr.uniform_range(-0.3, 0.3);
        for (auto& v : bn.running_var.data) v = pr.uniform_range(0.5, 2.0);
        auto eval_rep = check_gradients({&bn.gamma, &bn.beta, &x}, build, Mode::kEval, seed);
        CHECK(eval_rep.pass());
        CHECK(eval_rep.max_abs_grad > 0.0);
    }
}

// Freshly constructed nets sit exactly on relu kinks: biases start at zero,
// so a relu-dead column upstream makes the next pre-activation exactly zero,
// and a central difference straddles the kink while the subgradient is zero.
// Gradcheck therefore runs at a fully randomized parameter point, where the
// loss is differentiable almost surely.
template <typename L>
static void randomize_all(L& layer, Rng& rng) {
    std::vector<Parameter<double>*> ps;
    layer.params(ps);
    for (auto* p : ps)
        for (auto& v : p->value.data) v = rng.uniform_range(-0.5, 0.5);
}

TEST_CASE("gradcheck: feature transform and edge convolution") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed * 77 + 3);
        {
            const std::size_t k = 2 + rng.uniform_index(2), N = 4 + rng.uniform_index(3);
            Rng init(seed);
            STNkD<double> stn("stn", k, 2, init);
            randomize_all(stn, rng);
            auto x = rand_param<double>("x", {4, k, N}, rng);
            Tensor<double> w = rand_tensor<double>({4, k, N}, rng);
            std::vector<Parameter<double>*> ps;
            stn.params(ps);
            ps.push_back(&x);
            auto rep = check_gradients(
                ps,
                [&](Graph<double>& g) {
                    return weighted_sum(g, stn.forward(g, g.param(x)), w);
                },
                Mode::kTrain, seed, 1e-5, 32);
            CAPTURE(seed);
            CAPTURE(rep.max_rel_err);
            CAPTURE(rep.worst);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
        {
            const std::size_t C = 2 + rng.uniform_index(2), N = 5 + rng.uniform_index(3);
            const std::size_t K = 2 + rng.uniform_index(2);
            Rng init(seed);
            EdgeConv<double> ec("ec", C, 3, K, init);
            randomize_all(ec, rng);
            auto x = rand_param<double>("x", {2, C, N}, rng);
            Tensor<double> w = rand_tensor<double>({2, 3, N}, rng);
            std::vector<Parameter<double>*> ps;
            ec.params(ps);
            ps.push_back(&x);
            auto rep = check_gradients(
                ps,
                [&](Graph<double>& g) {
                    return weighted_sum(g, ec.forward(g, g.param(x)), w);
                },
                Mode::kTrain, seed);
            CAPTURE(seed);
            CAPTURE(rep.max_rel_err);
            CAPTURE(rep.worst);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
    }
}

TEST_CASE("gradcheck: every loss") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed * 53 + 1);
        const std::size_t B = 2 + rng.uniform_index(3), C = 3 + rng.uniform_index(4);
        std::vector<std::uint16_t> labels(B);
        for (auto& l : labels) l = static_cast<std::uint16_t>(rng.uniform_index(C));
        {
            auto z = rand_param<double>("z", {B, C}, rng, -2, 2);
            for (double gamma : {0.0, 2.0, 1.3}) {
                auto rep = check_gradients(
                    {&z},
                    [&](Graph<double>& g) {
                        return focal_loss(g, g.param(z), labels, gamma);
                    },
                    Mode::kTrain, seed);
                CHECK(rep.pass());
                CHECK(rep.max_abs_grad > 0.0);
            }
            auto ce = check_gradients(
                {&z},
                [&](Graph<double>& g) { return cross_entropy_loss(g, g.param(z), labels); },
                Mode::kTrain, seed);
            CHECK(ce.pass());
        }
        {
            const std::size_t Na = 3 + rng.uniform_index(3), Nb = 2 + rng.uniform_index(4);
            auto a = rand_param<double>("a", {2, Na, 3}, rng, -2, 2);
            auto b = rand_param<double>("b", {2, Nb, 3}, rng, -2, 2);
            auto rep = check_gradients(
                {&a, &b},
                [&](Graph<double>& g) { return chamfer_l1(g, g.param(a), g.param(b)); },
                Mode::kTrain, seed);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
        {
            auto z = rand_param<double>("z", {B, C}, rng, -2, 2);
            auto rep = check_gradients(
                {&z}, [&](Graph<double>& g) { return kl_to_uniform(g, g.param(z)); },
                Mode::kTrain, seed);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
        {
            // soft Gumbel sample (noise frozen by the graph seed)
            auto z = rand_param<double>("z", {B, C}, rng, -1, 1);
            Tensor<double> w = rand_tensor<double>({B, C}, rng);
            auto rep = check_gradients(
                {&z},
                [&](Graph<double>& g) {
                    return weighted_sum(g, gumbel_softmax_sample(g, g.param(z), 0.7, false), w);
                },
                Mode::kTrain, seed);
            CHECK(rep.pass());
            CHECK(rep.max_abs_grad > 0.0);
        }
    }
}

TEST_CASE("focal loss value oracles") {
    SUBCASE("logits [2,0,0], label 0, gamma 2") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> z(Shape{1, 3});
        z.data = {2.0, 0.0, 0.0};
        const double loss = g.val(focal_loss(g, g.input(z), {0}, 2.0)).data[0];
        const double p = std::exp(2.0) / (std::exp(2.0) + 2.0);
        CHECK(loss == doctest::Approx((1 - p) * (1 - p) * -std::log(p)).epsilon(1e-12));
        CHECK(loss == doctest::Approx(0.010876).epsilon(2e-3));
        CHECK(p == doctest::Approx(0.78699).epsilon(1e-4));
    }
    SUBCASE("confident correct prediction drives the loss to zero") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> z(Shape{1, 3});
        z.data = {50.0, 0.0, 0.0};
        const double loss = g.val(focal_loss(g, g.input(z), {0}, 2.0)).data[0];
        CHECK(loss >= 0.0);
        CHECK(loss < 1e-12);
    }
    SUBCASE("gamma 0 equals cross-entropy on random batches") {
        Rng rng(4);
        for (int trial = 0; trial < 10; ++trial) {
            Tensor<double> z = rand_tensor<double>({5, 7}, rng, -3, 3);
            std::vector<std::uint16_t> labels(5);
            for (auto& l : labels) l = static_cast<std::uint16_t>(rng.uniform_index(7));
            Graph<double> g(Mode::kEval, 0);
            NodeId zi = g.input(z);
            const double f = g.val(focal_loss(g, zi, labels, 0.0)).data[0];
            const double c = g.val(cross_entropy_loss(g, zi, labels)).data[0];
            CHECK(f == doctest::Approx(c).epsilon(1e-12));
        }
    }
    SUBCASE("label out of range is rejected") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> z(Shape{1, 3});
        NodeId zi = g.input(z);
        CHECK_THROWS_AS((void)focal_loss(g, zi, {3}, 2.0), InvalidInputError);
        CHECK_THROWS_AS((void)focal_loss(g, zi, {0}, -1.0), InvalidInputError);
    }
}

TEST_CASE("cross-entropy value oracles") {
    SUBCASE("uniform logits over 43 classes give ln 43") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> z(Shape{2, 43});
        const double loss = g.val(cross_entropy_loss(g, g.input(z), {7, 20})).data[0];
        CHECK(loss == doctest::Approx(std::log(43.0)).epsilon(1e-9));
        CHECK(loss == doctest::Approx(3.7612).epsilon(1e-3));
    }
    SUBCASE("a margin on the true class beats the uniform baseline") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> z(Shape{1, 43});
        z.data[5] = 4.0;
        const double loss = g.val(cross_entropy_loss(g, g.input(z), {5})).data[0];
        CHECK(loss < std::log(43.0));
    }
}

TEST_CASE("chamfer distance value oracles") {
    Rng rng(9);
    SUBCASE("identical clouds -> 0") {
        Tensor<double> a = rand_tensor<double>({6, 3}, rng);
        Graph<double> g(Mode::kEval, 0);
        CHECK(g.val(chamfer_l1(g, g.input(a), g.input(a))).data[0] == 0.0);
    }
    SUBCASE("single 3-4-5 pair -> 5 + 5") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> a(Shape{1, 3});
        Tensor<double> b(Shape{1, 3});
        b.data = {3.0, 4.0, 0.0};
        CHECK(g.val(chamfer_l1(g, g.input(a), g.input(b))).data[0] ==
              doctest::Approx(10.0).epsilon(1e-12));
    }
    SUBCASE("symmetric in its arguments") {
        for (int trial = 0; trial < 5; ++trial) {
            Tensor<double> a = rand_tensor<double>({5, 3}, rng);
            Tensor<double> b = rand_tensor<double>({8, 3}, rng);
            Graph<double> g(Mode::kEval, 0);
            NodeId ai = g.input(a), bi = g.input(b);
            const double ab = g.val(chamfer_l1(g, ai, bi)).data[0];
            const double ba = g.val(chamfer_l1(g, bi, ai)).data[0];
            CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
            CHECK(ab >= 0.0);
        }
    }
    SUBCASE("empty cloud is rejected") {
        Graph<double> g(Mode::kEval, 0);
        NodeId a = g.input(Tensor<double>(Shape{0, 3}));
        NodeId b = g.input(Tensor<double>(Shape{2, 3}));
        CHECK_THROWS_AS((void)chamfer_l1(g, a, b), InvalidInputError);
    }
    SUBCASE("batched form averages pairs") {
        // pair 0: distance 10 each way halves; pair 1: identical -> 0
        Tensor<double> a(Shape{2, 1, 3});
        Tensor<double> b(Shape{2, 1, 3});
        b.data = {3.0, 4.0, 0.0, 0.0, 0.0, 0.0};
        Graph<double> g(Mode::kEval, 0);
        CHECK(g.val(chamfer_l1(g, g.input(a), g.input(b))).data[0] ==
              doctest::Approx(5.0).epsilon(1e-12));
    }
}

TEST_CASE("KL to uniform value oracles") {
    SUBCASE("constant logits -> 0") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> z(Shape{3, 16}, 0.25);
        CHECK(g.val(kl_to_uniform(g, g.input(z))).data[0] == 0.0);
    }
    SUBCASE("a point mass over 8192 -> ln 8192") {
        Graph<double> g(Mode::kEval, 0);
        Tensor<double> z(Shape{1, 8192});
        z.data[100] = 200.0;  // softmax is numerically one-hot
        CHECK(g.val(kl_to_uniform(g, g.input(z))).data[0] ==
              doctest::Approx(std::log(8192.0)).epsilon(1e-9));
        CHECK(std::log(8192.0) == doctest::Approx(9.0109).epsilon(1e-3));
    }
    SUBCASE("non-negative on random logits") {
        Rng rng(21);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor<double> z = rand_tensor<double>({4, 9}, rng, -5, 5);
            Graph<double> g(Mode::kEval, 0);
            CHECK(g.val(kl_to_uniform(g, g.input(z))).data[0] >= 0.0);
        }
    }
}

TEST_CASE("gumbel softmax sampling") {
    Rng rng(2);
    SUBCASE("soft samples are distributions; hard samples are one-hot") {
        Tensor<float> z = rand_tensor<float>({6, 5}, rng, -2, 2);
        Graph<float> g(Mode::kTrain, 3);
        const Tensor<float>& soft = g.val(gumbel_softmax_sample(g, g.input(z), 0.5, false));
        for (std::size_t t = 0; t < 6; ++t) {
            double sum = 0.0;
            for (std::size_t v = 0; v < 5; ++v) sum += soft.data[t * 5 + v];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
        const Tensor<float>& hard = g.val(gumbel_softmax_sample(g, g.input(z), 0.5, true));
        for (std::size_t t = 0; t < 6; ++t) {
            int ones = 0, zeros = 0;
            for (std::size_t v = 0; v < 5; ++v) {
                if (hard.data[t * 5 + v] == 1.0f) ++ones;
                if (hard.data[t * 5 + v] == 0.0f) ++zeros;
            }
            CHECK(ones == 1);
            CHECK(zeros == 4);
        }
    }
    SUBCASE("tau <= 0 is rejected") {
        Graph<float> g(Mode::kTrain, 0);
        NodeId z = g.input(Tensor<float>(Shape{1, 4}));
        CHECK_THROWS_AS((void)gumbel_softmax_sample(g, z, 0.0, false), InvalidInputError);
    }
    SUBCASE("hard-mode argmax frequencies follow softmax(logits)") {
        // 100k tokens with identical logits in one draw
        const std::size_t L = 100000, V = 4;
        std::vector<double> base{0.9, 0.1, -0.4, 0.5};
        Tensor<double> z(Shape{L, V});
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t v = 0; v < V; ++v) z.data[t * V + v] = base[v];
        Graph<double> g(Mode::kTrain, 12345);
        const Tensor<double>& y = g.val(gumbel_softmax_sample(g, g.input(z), 1.0, true));
        std::vector<double> freq(V, 0.0);
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t v = 0; v < V; ++v)
                if (y.data[t * V + v] == 1.0) freq[v] += 1.0;
        double msum = 0.0;
        std::vector<double> p(V);
        for (std::size_t v = 0; v < V; ++v) msum += std::exp(base[v]);
        for (std::size_t v = 0; v < V; ++v) p[v] = std::exp(base[v]) / msum;
        for (std::size_t v = 0; v < V; ++v)
            CHECK(std::abs(freq[v] / static_cast<double>(L) - p[v]) < 0.01);
    }
    SUBCASE("hard mode backpropagates the soft gradient (straight-through)") {
        Tensor<double> z = rand_tensor<double>({3, 4}, rng, -1, 1);
        Tensor<double> w = rand_tensor<double>({3, 4}, rng);
        Parameter<double> zp("z", Shape{3, 4});
        zp.value.data = z.data;
        auto grad_of = [&](bool hard) {
            zp.zero_grad();
            Graph<double> g(Mode::kTrain, 777);
            NodeId y = gumbel_softmax_sample(g, g.param(zp), 0.8, hard);
            g.backward(weighted_sum(g, y, w));
            return zp.grad.data;
        };
        CHECK(grad_of(true) == grad_of(false));
    }
    SUBCASE("inference assignment is argmax without noise and blocks gradient") {
        Parameter<double> zp("z", Shape{2, 4});
        zp.value.data = {0.1, 3.0, -1.0, 0.2, 9.0, 0.0, 0.0, 8.9};
        Graph<double> g(Mode::kEval, 0);
        NodeId y = hard_assign(g, g.param(zp));
        CHECK(g.val(y).data == std::vector<double>{0, 1, 0, 0, 1, 0, 0, 0});
        auto touched = g.backward(weighted_sum(g, y, Tensor<double>(Shape{2, 4}, 1.0)));
        CHECK(touched.empty());
        CHECK(zp.grad.data == std::vector<double>(8, 0.0));
    }
}

TEST_CASE("batch norm semantics") {
    SUBCASE("training statistics and running updates, hand-checked") {
        BatchNorm<float> bn("bn", 1);
        Graph<float> g(Mode::kTrain, 0);
        Tensor<float> x(Shape{2, 1});
        x.data = {1.0f, 3.0f};
        const Tensor<float>& y = g.val(bn.forward(g, g.input(x)));
        const double is = 1.0 / std::sqrt(1.0 + 1e-5);
        CHECK(y.data[0] == doctest::Approx(-is).epsilon(1e-6));
        CHECK(y.data[1] == doctest::Approx(is).epsilon(1e-6));
        CHECK(bn.running_mean.data[0] == doctest::Approx(0.2).epsilon(1e-6));
        CHECK(bn.running_var.data[0] == doctest::Approx(0.9 + 0.1 * 2.0).epsilon(1e-6));
    }
    SUBCASE("eval mode is a fixed affine map and never updates stats") {
        Rng rng(8);
        BatchNorm<float> bn("bn", 3);
        bn.running_mean.data = {0.5f, -0.25f, 1.0f};
        bn.running_var.data = {1.5f, 0.75f, 2.0f};
        Tensor<float> x = rand_tensor<float>({4, 3, 5}, rng);
        const auto rm = bn.running_mean.data;
        const auto rv = bn.running_var.data;
        Graph<float> g1(Mode::kEval, 0);
        const auto y1 = g1.val(bn.forward(g1, g1.input(x))).data;
        Graph<float> g2(Mode::kEval, 1);
        const auto y2 = g2.val(bn.forward(g2, g2.input(x))).data;
        CHECK(y1 == y2);
        CHECK(bn.running_mean.data == rm);
        CHECK(bn.running_var.data == rv);
        // spot-check the affine formula on one element
        const double expect =
            (static_cast<double>(x.data[0]) - 0.5) / std::sqrt(1.5 + 1e-5);
        CHECK(y1[0] == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("feature transform starts exactly at the identity") {
    Rng rng(14);
    STNkD<float> stn("stn", 4, 4, rng);
    Tensor<float> x = rand_tensor<float>({3, 4, 9}, rng);
    Graph<float> g(Mode::kEval, 0);
    NodeId xi = g.input(x);
    const Tensor<float>& tr = g.val(stn.transform(g, xi));
    CHECK(tr.shape == Shape{3, 4, 4});
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                CHECK(tr.data[(b * 4 + i) * 4 + j] == (i == j ? 1.0f : 0.0f));
    // identity transform leaves the input untouched
    Graph<float> g2(Mode::kEval, 0);
    NodeId x2 = g2.input(x);
    CHECK(g2.val(stn.forward(g2, x2)).data == x.data);
}

TEST_CASE("kNN feature graph and edge features: hand-built oracle") {
    Tensor<float> x(Shape{1, 1, 4});
    x.data = {0.0f, 1.0f, 10.0f, 11.0f};
    auto idx = knn_feature_graph(x, 2);
    // self first (distance 0), then the near token of the same pair
    CHECK(idx == std::vector<std::uint32_t>{0, 1, 1, 0, 2, 3, 3, 2});

    Graph<float> g(Mode::kEval, 0);
    const Tensor<float>& e = g.val(edge_features(g, g.input(x), idx, 2));
    CHECK(e.shape == Shape{1, 2, 8});
    // channel 0: x_j - x_i per (token, neighbor)
    CHECK(e.data[0] == 0.0f);   // token 0, self
    CHECK(e.data[1] == 1.0f);   // token 0, neighbor 1
    CHECK(e.data[2] == 0.0f);   // token 1, self
    CHECK(e.data[3] == -1.0f);  // token 1, neighbor 0
    // channel 1: x_i broadcast
    CHECK(e.data[8] == 0.0f);
    CHECK(e.data[9] == 0.0f);
    CHECK(e.data[10] == 1.0f);
    CHECK(e.data[11] == 1.0f);
}

TEST_CASE("edge convolution is equivariant to token permutation") {
    Rng rng(17);
    EdgeConv<float> ec("ec", 3, 5, 3, rng);
    Tensor<float> x = rand_tensor<float>({2, 3, 7}, rng);
    std::vector<std::size_t> perm{4, 2, 6, 0, 3, 5, 1};
    Tensor<float> xp(Shape{2, 3, 7});
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t n = 0; n < 7; ++n)
                xp.data[(b * 3 + c) * 7 + n] = x.data[(b * 3 + c) * 7 + perm[n]];
    Graph<float> g(Mode::kEval, 0);
    const Tensor<float>& y = g.val(ec.forward(g, g.input(x)));
    Graph<float> g2(Mode::kEval, 0);
    const Tensor<float>& yp = g2.val(ec.forward(g2, g2.input(xp)));
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 5; ++c)
            for (std::size_t n = 0; n < 7; ++n)
                CHECK(yp.data[(b * 5 + c) * 7 + n] ==
                      doctest::Approx(y.data[(b * 5 + c) * 7 + perm[n]]).epsilon(1e-6));
}

TEST_CASE("xavier init bounds and zero biases") {
    Rng rng(20);
    Linear<float> lin("lin", 30, 50, rng);
    const double limit = std::sqrt(6.0 / (30.0 + 50.0));
    for (float v : lin.W.value.data) {
        CHECK(v <= limit);
        CHECK(v >= -limit);
    }
    CHECK(lin.b.value.data == std::vector<float>(50, 0.0f));
    // deterministic per seed
    Rng rng2(20);
    Linear<float> lin2("lin", 30, 50, rng2);
    CHECK(lin.W.value.data == lin2.W.value.data);
}

TEST_CASE("optimizer contracts") {
    SUBCASE("zero gradient and zero decay leave parameters untouched") {
        Parameter<float> p("p", Shape{4});
        p.value.data = {1.0f, -2.0f, 3.0f, 0.5f};
        const auto before = p.value.data;
        for (OptVariant v : {OptVariant::kAdam, OptVariant::kAdamW}) {
            OptimizerConfig cfg;
            cfg.variant = v;
            Optimizer<float> opt({&p}, cfg);
            opt.zero_grad();
            opt.step();
            CHECK(p.value.data == before);
        }
    }
    SUBCASE("decoupled decay shrinks weights even with zero gradient") {
        Parameter<float> p("p", Shape{2});
        p.value.data = {2.0f, -2.0f};
        OptimizerConfig cfg;
        cfg.variant = OptVariant::kAdamW;
        cfg.lr = 0.1;
        cfg.weight_decay = 0.1;
        Optimizer<float> opt({&p}, cfg);
        opt.zero_grad();
        opt.step();
        CHECK(p.value.data[0] < 2.0f);
        CHECK(p.value.data[0] > 1.9f);
        CHECK(p.value.data[1] > -2.0f);
    }
    SUBCASE("minimizes a quadratic to |x| < 1e-3 within 500 steps") {
        for (OptVariant v : {OptVariant::kAdam, OptVariant::kAdamW}) {
            Parameter<double> x("x", Shape{1});
            x.value.data[0] = 1.0;
            OptimizerConfig cfg;
            cfg.variant = v;
            cfg.lr = 0.1;
            Optimizer<double> opt({&x}, cfg);
            int steps = 0;
            while (std::abs(x.value.data[0]) >= 1e-3 && steps < 500) {
                opt.zero_grad();
                x.grad.data[0] = 2.0 * x.value.data[0];  // d/dx of x^2
                opt.step();
                ++steps;
            }
            CHECK(std::abs(x.value.data[0]) < 1e-3);
            CHECK(steps < 500);
        }
    }
    SUBCASE("frozen parameters are skipped") {
        Parameter<float> p("p", Shape{1});
        p.value.data[0] = 1.0f;
        p.freeze(true);
        OptimizerConfig cfg;
        cfg.variant = OptVariant::kAdamW;
        cfg.weight_decay = 0.5;
        Optimizer<float> opt({&p}, cfg);
        p.grad.data[0] = 10.0f;
        opt.step();
        CHECK(p.value.data[0] == 1.0f);
    }
}

TEST_CASE("learning-rate schedules") {
    SUBCASE("warm restarts: base at step 0 and at every restart") {
        auto s = LrSchedule::warm_restarts(1e-4, 10, 2);
        CHECK(s.at(0) == doctest::Approx(1e-4).epsilon(1e-12));
        CHECK(s.at(10) == doctest::Approx(1e-4).epsilon(1e-12));  // cycle 2 start
        CHECK(s.at(30) == doctest::Approx(1e-4).epsilon(1e-12));  // cycle 3 start
        CHECK(s.at(5) == doctest::Approx(0.5e-4).epsilon(1e-9));  // half-cycle midpoint
        for (std::size_t t = 0; t < 200; ++t) {
            CHECK(s.at(t) > 0.0);
            CHECK(s.at(t) <= 1e-4 + 1e-18);
        }
        // restart jump: LR rises across the cycle boundary
        CHECK(s.at(10) > s.at(9));
        CHECK(lr_at(s, 3) == s.at(3));
    }
    SUBCASE("warmup cosine: warmup floor, ramp, cosine tail, floor after the cycle") {
        auto s = LrSchedule::warmup_cosine(5e-4);
        CHECK(s.at(0) == doctest::Approx(1e-6).epsilon(1e-12));
        for (std::size_t t = 1; t <= 10; ++t) CHECK(s.at(t) > s.at(t - 1));  // ramp up
        CHECK(s.at(10) == doctest::Approx(5e-4).epsilon(5e-3));  // near the peak
        for (std::size_t t = 11; t < 300; ++t) CHECK(s.at(t) < s.at(t - 1));  // anneal
        CHECK(s.at(300) == doctest::Approx(1e-6).epsilon(1e-12));  // beyond cycle_limit
        CHECK(s.at(1000) == doctest::Approx(1e-6).epsilon(1e-12));
        for (std::size_t t = 0; t < 400; ++t) CHECK(s.at(t) > 0.0);
    }
}

TEST_CASE("checkpoint container round trip and failure modes") {
    Rng rng(33);
    Linear<float> lin("lin", 6, 4, rng);
    BatchNorm<float> bn("bn", 4);
    bn.running_mean.data = {0.1f, 0.2f, 0.3f, 0.4f};
    std::vector<NamedTensor<float>> state;
    lin.state(state);
    bn.state(state);
    const std::string path = tmp_path("ckpt");

    SUBCASE("round trip restores exact bytes and metadata") {
        save_checkpoint(path, state, 1234, "pretrain");
        const auto w_before = lin.W.value.data;
        const auto rm_before = bn.running_mean.data;
        for (auto& v : lin.W.value.data) v += 1.0f;
        for (auto& v : bn.running_mean.data) v -= 2.0f;
        const std::uint64_t step = load_state(path, state);
        CHECK(step == 1234);
        CHECK(lin.W.value.data == w_before);
        CHECK(bn.running_mean.data == rm_before);
        CHECK(lin.W.value.requires_grad);  // flag survives the load

        auto ck = load_checkpoint<float>(path);
        CHECK(ck.step == 1234);
        CHECK(ck.stage == "pretrain");
        CHECK(ck.tensors.size() == state.size());
    }
    SUBCASE("dtype tag mismatch is a format error") {
        save_checkpoint(path, state, 1, "x");
        CHECK_THROWS_AS((void)load_checkpoint<double>(path), FormatError);
    }
    SUBCASE("shape mismatch against the model is a format error") {
        save_checkpoint(path, state, 1, "x");
        Rng r2(1);
        Linear<float> other("lin", 6, 5, r2);  // same names, different shape
        BatchNorm<float> bn2("bn", 4);
        std::vector<NamedTensor<float>> st2;
        other.state(st2);
        bn2.state(st2);
        CHECK_THROWS_AS((void)load_state(path, st2), FormatError);
    }
    SUBCASE("unknown and missing tensor names are format errors") {
        save_checkpoint(path, state, 1, "x");
        Rng r2(1);
        Linear<float> renamed("other", 6, 4, r2);
        BatchNorm<float> bn2("bn", 4);
        std::vector<NamedTensor<float>> st2;
        renamed.state(st2);
        bn2.state(st2);
        CHECK_THROWS_AS((void)load_state(path, st2), FormatError);
    }
    SUBCASE("corrupt files are format errors") {
        save_checkpoint(path, state, 1, "x");
        auto bytes = read_file(path);
        auto truncated = bytes;
        truncated.resize(truncated.size() / 2);
        write_file(path + ".t", truncated);
        CHECK_THROWS_AS((void)load_checkpoint<float>(path + ".t"), FormatError);
        auto magic = bytes;
        magic[0] = 'X';
        write_file(path + ".m", magic);
        CHECK_THROWS_AS((void)load_checkpoint<float>(path + ".m"), FormatError);
        auto trailing = bytes;
        trailing.push_back(0);
        write_file(path + ".x", trailing);
        CHECK_THROWS_AS((void)load_checkpoint<float>(path + ".x"), FormatError);
    }
}

TEST_CASE("seeded graphs replay stochastic ops bit-exactly") {
    Rng rng(40);
    Tensor<float> x = rand_tensor<float>({8, 10}, rng);
    auto run = [&](std::uint64_t seed) {
        Graph<float> g(Mode::kTrain, seed);
        NodeId h = dropout(g, g.input(x), 0.3);
        NodeId y = gumbel_softmax_sample(g, h, 1.0, false);
        return g.val(y).data;
    };
    CHECK(run(99) == run(99));
    CHECK(run(99) != run(100));
}
