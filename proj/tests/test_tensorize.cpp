#include <doctest.h>

#include "heurnet/gradcheck.hpp"
#include "heurnet/linalg.hpp"
#include "heurnet/polysys.hpp"
#include "heurnet/tensorize.hpp"

#include <cmath>
#include <random>

using heurnet::Shape;
using heurnet::Tensor;
namespace ad = heurnet::ad;
namespace tz = heurnet::tensorize;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t(std::move(shape));
    for (auto& v : t.raw()) v = u(rng);
    return t;
}

}  // namespace

TEST_CASE("identity_dense gives the squared distance") {
    ad::ParameterSet ps;
    const auto& A = ps.add(tz::identity_dense("A", 3));
    CHECK(A.value == Tensor::identity(3));
    ad::Graph g;
    auto q = tz::mahalanobis(g, g.param(A), g.constant(Tensor::vector({1, 0, 2})), g.constant(Tensor::vector({0, 0, 0})));
    CHECK(q.item() == 5.0);

    ad::Graph g2;
    Tensor two = Tensor::identity(2);
    for (auto& v : two.raw()) v *= 2;
    auto q2 = tz::mahalanobis(g2, g2.constant(two), g2.constant(Tensor::vector({3, 2})), g2.constant(Tensor::vector({2, 1})));
    CHECK(q2.item() == 4.0);

    CHECK_THROWS(tz::identity_dense("A", 0));

    std::mt19937_64 rng(1);
    for (std::size_t d = 1; d <= 6; ++d) {
        for (int rep = 0; rep < 20; ++rep) {
            Tensor x = random_tensor(rng, {d}), y = random_tensor(rng, {d});
            double ref = 0.0;
            for (std::size_t i = 0; i < d; ++i) ref += (x[i] - y[i]) * (x[i] - y[i]);
            ad::Graph gg;
            auto qq = tz::mahalanobis(gg, gg.constant(Tensor::identity(d)), gg.constant(x), gg.constant(y));
            CHECK(std::abs(qq.item() - ref) <= 1e-12 * std::max(1.0, ref));
        }
    }
}

TEST_CASE("mahalanobis gradient after perturbation matches finite differences") {
    ad::ParameterSet ps;
    auto& A = ps.add(tz::identity_dense("A", 3));
    A.value.at(0, 2) = 0.3;
    const Tensor x = Tensor::vector({0.4, -1.1, 0.7}), y = Tensor::vector({0.1, 0.2, -0.5});
    auto build = [&](ad::Graph& g, const ad::ParameterSet& p) {
        return tz::mahalanobis(g, g.param(p[0]), g.constant(x), g.constant(y));
    };
    CHECK(heurnet::gradcheck::check(build, ps) < 1e-6);
}

TEST_CASE("toeplitz_apply examples") {
    ad::Graph g;
    auto x = g.constant(Tensor::vector({3, 5, 9}));
    CHECK(tz::toeplitz_apply(g, g.constant(Tensor::vector({1})), x).value() == Tensor::vector({3, 5, 9}));
    CHECK(tz::toeplitz_apply(g, g.constant(Tensor::vector({-1, 1})), x).value() == Tensor::vector({2, 4}));
    CHECK_THROWS_AS(tz::toeplitz_apply(g, g.constant(Tensor::matrix(1, 1, {1})), x), heurnet::ShapeError);
    CHECK_THROWS(tz::toeplitz_apply(g, g.constant(Tensor::vector({1, 1, 1, 1})), x));
}

TEST_CASE("toeplitz_apply equals the dense materialization") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> len(1, 32);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = len(rng);
        const std::size_t k = 1 + len(rng) % n;
        Tensor kernel = random_tensor(rng, {k}), x = random_tensor(rng, {n});
        ad::Graph g;
        Tensor conv = tz::toeplitz_apply(g, g.constant(kernel), g.constant(x)).value();
        Tensor M = tz::toeplitz_dense(kernel, x.shape());
        Tensor dense = heurnet::linalg::matmul(M, x);
        REQUIRE(conv.shape() == dense.shape());
        for (std::size_t i = 0; i < conv.size(); ++i) CHECK(std::abs(conv[i] - dense[i]) <= 1e-12);
        // constant diagonals
        for (std::size_t r = 0; r + 1 < M.dim(0); ++r)
            for (std::size_t c = 0; c + 1 < M.dim(1); ++c) CHECK(M.at(r, c) == M.at(r + 1, c + 1));
    }
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t H = 1 + len(rng) % 16, W = 1 + len(rng) % 16;
        const std::size_t kh = 1 + len(rng) % H, kw = 1 + len(rng) % W;
        Tensor kernel = random_tensor(rng, {kh, kw}), x = random_tensor(rng, {H, W});
        ad::Graph g;
        Tensor conv = tz::toeplitz_apply(g, g.constant(kernel), g.constant(x)).value();
        Tensor dense = heurnet::linalg::matmul(tz::toeplitz_dense(kernel, x.shape()), x.reshaped({H * W}));
        REQUIRE(conv.size() == dense.size());
        for (std::size_t i = 0; i < conv.size(); ++i) CHECK(std::abs(conv[i] - dense[i]) <= 1e-12);
    }
}

TEST_CASE("gate_merge examples") {
    ad::Graph g;
    auto a = g.constant(Tensor::vector({0.1, -2.7, 3e10}));
    auto b = g.constant(Tensor::vector({5.5, 1.0 / 3.0, -1e-300}));
    const Tensor on1 = tz::gate_merge(g, g.constant(1.0), a, b).value();
    const Tensor on0 = tz::gate_merge(g, g.constant(0.0), a, b).value();
    CHECK(heurnet::bitwise_equal(on1, a.value()));
    CHECK(heurnet::bitwise_equal(on0, b.value()));
    auto half = tz::gate_merge(g, g.constant(0.5), g.constant(Tensor::vector({2, 4})), g.constant(Tensor::vector({6, 0})));
    CHECK(half.value() == Tensor::vector({4, 2}));
    CHECK_THROWS_AS(tz::gate_merge(g, g.constant(1.0), a, g.constant(Tensor::vector({1, 2}))), heurnet::ShapeError);

    ad::ParameterSet ps;
    CHECK(ps.add(tz::gate_weight("w", true)).value.item() == 1.0);
    CHECK(ps.add(tz::gate_weight("v", false)).value.item() == 0.0);
}

TEST_CASE("binary gate_merge equals the native conditional") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int rep = 0; rep < 1000; ++rep) {
        const double x = u(rng), t = u(rng);
        const bool cond = x > t;
        const double native = cond ? x * x : 3.0 * x - 7.0;
        ad::Graph g;
        auto xv = g.constant(x);
        auto merged = tz::gate_merge(g, g.constant(cond ? 1.0 : 0.0), g.mul(xv, xv), g.sub(g.scale(xv, 3.0), g.constant(7.0)));
        CHECK(merged.item() == native);
    }
}

TEST_CASE("unroll examples") {
    ad::Graph g;
    auto inc = [](ad::Graph& gr, ad::Var s, int) { return gr.add(s, gr.constant(1.0)); };
    CHECK(tz::unroll(g, g.constant(0.0), 3, inc).item() == 3.0);
    CHECK_THROWS(tz::unroll(g, g.constant(0.0), 0, inc));

    // Settles once the state has left zero: frozen at the step-1 value.
    tz::SettlePredicate after_first = [](const Tensor& s) { return s.item() != 0.0; };
    CHECK(tz::unroll(g, g.constant(0.0), 5, inc, after_first).item() == 1.0);
    tz::SettlePredicate never = [](const Tensor&) { return false; };
    CHECK(tz::unroll(g, g.constant(0.0), 5, inc, never).item() == 5.0);
}

TEST_CASE("settle gate routes gradient through the carried state only") {
    ad::ParameterSet ps;
    ps.add(ad::Parameter{"a", Tensor::scalar(2.0), true});
    auto build = [](ad::Graph& g, const ad::ParameterSet& p) {
        auto a = g.param(p[0]);
        tz::SettlePredicate big = [](const Tensor& s) { return s.item() > 3.0; };
        auto step = [a](ad::Graph& gr, ad::Var s, int) { return gr.mul(s, a); };
        return tz::unroll(g, g.constant(1.0), 4, step, big);
    };
    ad::Graph g;
    auto out = build(g, ps);
    CHECK(out.item() == 4.0);  // 1 -> 2 -> 4, then frozen
    g.backward(out);
    CHECK(g.gradients(ps)[0].item() == 4.0);  // d(a^2)/da
}

TEST_CASE("unrolled Newton step on x^2 - 2 equals the classic path") {
    namespace poly = heurnet::poly;
    const auto s = poly::parse_poly("x^2 - 2");
    for (double x0 : {1.0, 0.5, 3.0, -1.7}) {
        ad::Graph g;
        auto step = [&s](ad::Graph& gr, ad::Var x, int) {
            auto F = poly::eval_F(gr, s, x);
            auto Jinv = gr.mat_inverse_small(poly::eval_J(gr, s, x));
            return gr.sub(x, gr.matmul(Jinv, F));
        };
        auto out = tz::unroll(g, g.constant(Tensor::vector({x0})), 3, step);
        auto ref = poly::newton_classic(s, Tensor::vector({x0}), 3, 1.0);
        CHECK(out.value() == ref.x);
    }
}
