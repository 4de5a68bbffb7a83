#include <doctest.h>

#include "heurnet/polysys.hpp"

#include <cmath>
#include <random>

using heurnet::Tensor;
namespace ad = heurnet::ad;
namespace poly = heurnet::poly;

namespace {

poly::PolySystem random_system(std::mt19937_64& rng, int vars, int degree) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    poly::PolySystem s(vars, vars, degree);
    for (int j = 0; j < vars; ++j)
        for (const auto& m : s.monomials()) s.set_coeff(j, m.ex, m.ey, u(rng));
    return s;
}

double f1(const poly::PolySystem& s, double x) { return poly::eval_F(s, Tensor::vector({x}))[0]; }

}  // namespace

TEST_CASE("parse_poly examples") {
    auto a = poly::parse_poly("x^2 - 2");
    CHECK(a.vars() == 1);
    CHECK(a.equations() == 1);
    CHECK(a.max_degree() == 2);
    CHECK(a.coeff(0, 2) == 1.0);
    CHECK(a.coeff(0, 1) == 0.0);
    CHECK(a.coeff(0, 0) == -2.0);

    auto b = poly::parse_poly("x^5 - S");
    CHECK(b.max_degree() == 5);
    CHECK(b.has_placeholder());
    CHECK(b.placeholder_coeffs().at(0, 0) == -1.0);
    auto bound = b.bind(32.0);
    CHECK(bound.coeff(0, 0) == -32.0);
    CHECK(f1(bound, 2.0) == 0.0);

    auto c = poly::parse_poly("x^2*y - 3*y + 1");
    CHECK(c.vars() == 2);
    CHECK(c.max_degree() == 3);
    CHECK(c.coeff(0, 2, 1) == 1.0);
    CHECK(c.coeff(0, 0, 1) == -3.0);
    CHECK(c.coeff(0, 0, 0) == 1.0);
    CHECK(c.coeff(0, 1, 0) == 0.0);

    auto sys = poly::parse_poly("x^2 + y^2 - 1; x - y");
    CHECK(sys.equations() == 2);
    CHECK(sys.coeff(1, 1, 0) == 1.0);
    CHECK(sys.coeff(1, 0, 1) == -1.0);

    auto implicit = poly::parse_poly("-2.5x^3 + 1e-1 x");
    CHECK(implicit.coeff(0, 3) == -2.5);
    CHECK(implicit.coeff(0, 1) == doctest::Approx(0.1));
}

TEST_CASE("parse_poly errors") {
    CHECK_THROWS_AS(poly::parse_poly("x^7 + 1"), poly::ParseError);
    CHECK_THROWS_AS(poly::parse_poly("x^4*y^3"), poly::ParseError);
    try {
        poly::parse_poly("x^2 + * 3");
        FAIL("expected parse error");
    } catch (const poly::ParseError& e) {
        CHECK(e.position() == 6);
    }
    CHECK_THROWS_AS(poly::parse_poly(""), poly::ParseError);
    CHECK_THROWS_AS(poly::parse_poly("x^2 + 1 )"), poly::ParseError);
    CHECK_THROWS_AS(poly::parse_poly("x^"), poly::ParseError);
    CHECK_THROWS_AS(poly::parse_poly("1.2.3 x"), poly::ParseError);
}

TEST_CASE("to_string round-trips through the parser") {
    std::mt19937_64 rng(3);
    for (int vars = 1; vars <= 2; ++vars) {
        auto s = random_system(rng, vars, vars == 1 ? 6 : 3);
        auto back = poly::parse_poly(s.to_string());
        CHECK(back.coeffs() == s.coeffs());
    }
}

TEST_CASE("eval_F examples") {
    CHECK(f1(poly::parse_poly("x^2 + 1"), 2.0) == 5.0);
    auto tmpl = poly::parse_poly("x^5 - S");
    for (double S : {0.1, 0.7, 1.3, 2.0, 5.0}) CHECK(std::abs(f1(tmpl.bind(S), std::pow(S, 0.2))) < 1e-12);
}

TEST_CASE("Horner matches naive monomial sum on 1000 random systems") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int rep = 0; rep < 1000; ++rep) {
        const int vars = 1 + rep % 2;
        auto s = random_system(rng, vars, vars == 1 ? 6 : 1 + rep % 6);
        std::vector<double> x = {u(rng), u(rng)};
        x.resize(static_cast<std::size_t>(vars));
        auto fast = poly::eval_F(s, Tensor::vector(x));
        auto naive = poly::eval_naive(s, x);
        double scale = 0.0;
        for (std::size_t m = 0; m < s.monomial_count(); ++m) scale = std::max(scale, std::abs(s.coeffs()[m]));
        for (std::size_t j = 0; j < naive.size(); ++j)
            CHECK(std::abs(fast[j] - naive[j]) <= 1e-12 * std::max({1.0, std::abs(naive[j]), scale}));
    }
}

TEST_CASE("graph evaluation equals plain evaluation exactly") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const int vars = 1 + rep % 2;
        auto s = random_system(rng, vars, vars == 1 ? 6 : 2);
        Tensor x = vars == 1 ? Tensor::vector({0.37 * rep - 3}) : Tensor::vector({0.1 * rep - 2, 1.0 - 0.03 * rep});
        ad::Graph g;
        auto xv = g.constant(x);
        CHECK(poly::eval_F(g, s, xv).value() == poly::eval_F(s, x));
        CHECK(poly::eval_J(g, s, xv).value() == poly::eval_J(s, x));
    }
}

TEST_CASE("eval_J examples and finite-difference check") {
    CHECK(poly::eval_J(poly::parse_poly("x^2 - 2"), Tensor::vector({3}))[0] == 6.0);
    CHECK(poly::eval_J(poly::parse_poly("4"), Tensor::vector({3}))[0] == 0.0);

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-5;
    for (int rep = 0; rep < 200; ++rep) {
        const int vars = 1 + rep % 2;
        auto s = random_system(rng, vars, vars == 1 ? 6 : 3);
        Tensor x(heurnet::Shape{static_cast<std::size_t>(vars)});
        for (auto& v : x.raw()) v = u(rng);
        auto J = poly::eval_J(s, x);
        for (int v = 0; v < vars; ++v) {
            Tensor xp = x, xm = x;
            xp[v] += h;
            xm[v] -= h;
            auto Fp = poly::eval_F(s, xp), Fm = poly::eval_F(s, xm);
            for (int j = 0; j < vars; ++j) {
                const double fd = (Fp[j] - Fm[j]) / (2 * h);
                CHECK(std::abs(fd - J.at(j, v)) < 1e-6 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("newton_classic examples") {
    auto s = poly::parse_poly("x^2 - 2");
    auto one = poly::newton_classic(s, Tensor::vector({1.0}), 1, 1.0);
    CHECK(one.x[0] == 1.5);
    auto two = poly::newton_classic(s, Tensor::vector({1.0}), 2, 1.0);
    CHECK(two.x[0] == doctest::Approx(17.0 / 12.0).epsilon(1e-15));
    auto sing = poly::newton_classic(s, Tensor::vector({0.0}), 1, 1.0);
    CHECK(sing.singular_steps == 1);
    CHECK(sing.diverged());
    CHECK(sing.x[0] == 0.0);
    auto zero = poly::newton_classic(s, Tensor::vector({1.0}), 0, 1.0);
    CHECK(zero.x[0] == 1.0);
    CHECK_THROWS(poly::newton_classic(poly::parse_poly("x + y"), Tensor::vector({0, 0}), 1));
}

TEST_CASE("newton_ls examples") {
    auto s = poly::parse_poly("x^2 - 2");
    auto ls1 = poly::newton_ls(s, Tensor::vector({1.0}), 1);
    CHECK(ls1.x[0] == 1.5);
    CHECK(ls1.chosen_alpha[0] == 1.0);
    CHECK(ls1.residuals[0] == 0.25);
    // Hand enumeration of the other candidates.
    CHECK(std::abs(f1(s, 1.25)) == 0.4375);
    CHECK(std::abs(f1(s, 1.75)) == 1.0625);

    CHECK_THROWS(poly::newton_ls(s, Tensor::vector({1.0}), 1, {}));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const int vars = 1 + rep % 2;
        auto sys = random_system(rng, vars, vars == 1 ? 6 : 2);
        Tensor x0(heurnet::Shape{static_cast<std::size_t>(vars)});
        for (auto& v : x0.raw()) v = u(rng);
        auto single = poly::newton_ls(sys, x0, 3, {1.0});
        auto classic = poly::newton_classic(sys, x0, 3, 1.0);
        CHECK(single.x == classic.x);
    }
}

TEST_CASE("newton_ls never does worse than the unit step from the same iterate") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const int vars = 1 + rep % 2;
        auto sys = random_system(rng, vars, vars == 1 ? 6 : 2);
        Tensor x(heurnet::Shape{static_cast<std::size_t>(vars)});
        for (auto& v : x.raw()) v = u(rng);
        for (int step = 0; step < 3; ++step) {
            auto ls = poly::newton_ls(sys, x, 1);
            auto unit = poly::newton_classic(sys, x, 1, 1.0);
            CHECK(ls.residuals[0] <= unit.residuals[0]);
            x = ls.x;
        }
    }
}

TEST_CASE("roots_oracle examples") {
    auto r = poly::roots_oracle(poly::parse_poly("x^2 - 4"));
    REQUIRE(r.roots.size() == 2);
    CHECK(r.roots[0][0] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(r.roots[1][0] == doctest::Approx(2.0).epsilon(1e-12));

    CHECK(poly::roots_oracle(poly::parse_poly("x^2 + 1")).empty());

    auto fifth = poly::roots_oracle(poly::parse_poly("x^5 - 2"));
    REQUIRE(fifth.roots.size() == 1);
    CHECK(fifth.roots[0][0] == doctest::Approx(std::pow(2.0, 0.2)).epsilon(1e-12));
    CHECK(std::abs(fifth.roots[0][0] - 1.148698) < 1e-6);

    auto circle = poly::roots_oracle(poly::parse_poly("x^2 + y^2 - 1; x - y"));
    REQUIRE(circle.roots.size() == 2);
    const double h = std::sqrt(0.5);
    CHECK(circle.roots[0][0] == doctest::Approx(-h));
    CHECK(circle.roots[1][1] == doctest::Approx(h));

    CHECK(poly::roots_oracle(poly::parse_poly("x^2 + y^2 + 1; x - y")).empty());
}

TEST_CASE("roots_oracle roots have small residual and are deterministic") {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 40; ++rep) {
        const int vars = 1 + rep % 2;
        auto sys = random_system(rng, vars, vars == 1 ? 6 : 2);
        auto a = poly::roots_oracle(sys);
        auto b = poly::roots_oracle(sys);
        REQUIRE(a.roots.size() == b.roots.size());
        for (std::size_t i = 0; i < a.roots.size(); ++i) {
            CHECK(a.roots[i] == b.roots[i]);
            CHECK(poly::residual_norm(poly::eval_F(sys, a.roots[i])) < 1e-9);
            for (std::size_t k = 0; k < i; ++k) {
                double d = 0.0;
                for (std::size_t c = 0; c < a.roots[i].size(); ++c)
                    d += (a.roots[i][c] - a.roots[k][c]) * (a.roots[i][c] - a.roots[k][c]);
                CHECK(std::sqrt(d) > 1e-6);
            }
        }
    }
}

TEST_CASE("min_sq_distance") {
    poly::RootSet r;
    r.roots = {Tensor::vector({-2}), Tensor::vector({2})};
    CHECK(r.min_sq_distance(Tensor::vector({1.5})) == 0.25);
    CHECK(std::isinf(poly::RootSet{}.min_sq_distance(Tensor::vector({0}))));
}
