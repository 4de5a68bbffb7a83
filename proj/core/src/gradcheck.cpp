#include "heurnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace heurnet::gradcheck {

std::vector<Tensor> finite_diff_gradient(const std::function<double()>& f, ad::ParameterSet& params, double h) {
    auto grads = params.zero_grads();
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        if (!p.trainable) continue;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double w = p.value[i];
            p.value[i] = w + h;
            const double up = f();
            p.value[i] = w - h;
            const double down = f();
            p.value[i] = w;
            grads[k][i] = (up - down) / (2.0 * h);
        }
    }
    return grads;
}

double rel_error(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::infinity();
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double max_rel_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size()) throw ShapeError("max_rel_error: gradient list lengths differ");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].shape() != b[k].shape()) throw ShapeError("max_rel_error: gradient shapes differ");
        for (std::size_t i = 0; i < a[k].size(); ++i) m = std::max(m, rel_error(a[k][i], b[k][i]));
    }
    return m;
}

double check(const LossBuilder& build, ad::ParameterSet& params, double h) {
    std::vector<Tensor> analytic;
    {
        ad::Graph g;
        ad::Var loss = build(g, params);
        g.backward(loss);
        analytic = g.gradients(params);
    }
    for (std::size_t k = 0; k < params.size(); ++k)
        if (!params[k].trainable) analytic[k] = Tensor::zeros_like(params[k].value);
    auto numeric = finite_diff_gradient(
        [&] {
            ad::Graph g;
            return build(g, params).item();
        },
        params, h);
    return max_rel_error(analytic, numeric);
}

// ---------------------------------------------------------------------------
// Op suite

namespace {

struct Sampler {
    std::mt19937_64 rng;
    explicit Sampler(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

    Tensor tensor(Shape shape, double kink_margin = 0.0) {
        Tensor t(std::move(shape));
        for (auto& x : t.raw()) {
            do x = uniform();
            while (std::abs(x) < kink_margin);
        }
        return t;
    }
};

// Weighted sum so each output coordinate gets a distinct upstream gradient.
ad::Var weighted_sum(ad::Graph& g, ad::Var out, const Tensor& w) {
    return g.sum(g.mul(out, g.constant(w)));
}

using Unary = std::function<ad::Var(ad::Graph&, ad::Var)>;
using Binary = std::function<ad::Var(ad::Graph&, ad::Var, ad::Var)>;

Case unary_case(std::string name, Shape in_shape, Shape out_shape, Unary op, double kink_margin = 0.0) {
    return Case{std::move(name), [=](std::uint64_t seed) {
                    Sampler s(seed);
                    ad::ParameterSet ps;
                    ps.add("x", s.tensor(in_shape, kink_margin));
                    Tensor w = s.tensor(out_shape);
                    LossBuilder b = [op, w](ad::Graph& g, const ad::ParameterSet& p) {
                        return weighted_sum(g, op(g, g.param(p[0])), w);
                    };
                    return std::pair{std::move(ps), b};
                }};
}

Case binary_case(std::string name, Shape a_shape, Shape b_shape, Shape out_shape, Binary op) {
    return Case{std::move(name), [=](std::uint64_t seed) {
                    Sampler s(seed);
                    ad::ParameterSet ps;
                    ps.add("a", s.tensor(a_shape));
                    ps.add("b", s.tensor(b_shape));
                    Tensor w = s.tensor(out_shape);
                    LossBuilder b = [op, w](ad::Graph& g, const ad::ParameterSet& p) {
                        return weighted_sum(g, op(g, g.param(p[0]), g.param(p[1])), w);
                    };
                    return std::pair{std::move(ps), b};
                }};
}

}  // namespace

std::vector<Case> op_cases() {
    std::vector<Case> cases;
    cases.push_back(binary_case("add", {3, 4}, {3, 4}, {3, 4}, [](ad::Graph& g, ad::Var a, ad::Var b) { return g.add(a, b); }));
    cases.push_back(binary_case("add_scalar_broadcast", {5}, {1}, {5},
                                [](ad::Graph& g, ad::Var a, ad::Var b) { return g.add(a, b); }));
    cases.push_back(binary_case("sub", {3, 4}, {3, 4}, {3, 4}, [](ad::Graph& g, ad::Var a, ad::Var b) { return g.sub(a, b); }));
    cases.push_back(binary_case("mul", {3, 4}, {3, 4}, {3, 4}, [](ad::Graph& g, ad::Var a, ad::Var b) { return g.mul(a, b); }));
    cases.push_back(binary_case("mul_scalar_broadcast", {1}, {6}, {6},
                                [](ad::Graph& g, ad::Var a, ad::Var b) { return g.mul(a, b); }));
    cases.push_back(unary_case("neg", {7}, {7}, [](ad::Graph& g, ad::Var x) { return g.neg(x); }));
    cases.push_back(unary_case("abs", {4, 4}, {4, 4}, [](ad::Graph& g, ad::Var x) { return g.abs(x); }, 1e-3));
    cases.push_back(unary_case("square", {4, 4}, {4, 4}, [](ad::Graph& g, ad::Var x) { return g.square(x); }));
    cases.push_back(unary_case("scale", {6}, {6}, [](ad::Graph& g, ad::Var x) { return g.scale(x, -2.5); }));
    cases.push_back(binary_case("matmul", {4, 4}, {4, 4}, {4, 4},
                                [](ad::Graph& g, ad::Var a, ad::Var b) { return g.matmul(a, b); }));
    cases.push_back(binary_case("matmul_vector", {3, 5}, {5}, {3},
                                [](ad::Graph& g, ad::Var a, ad::Var b) { return g.matmul(a, b); }));
    cases.push_back(unary_case("transpose", {3, 5}, {5, 3}, [](ad::Graph& g, ad::Var x) { return g.transpose(x); }));
    cases.push_back(binary_case("conv2d_valid", {6, 6}, {3, 3}, {4, 4},
                                [](ad::Graph& g, ad::Var a, ad::Var b) { return g.conv2d_valid(a, b); }));
    cases.push_back(binary_case("conv1d_valid", {9}, {3}, {7},
                                [](ad::Graph& g, ad::Var a, ad::Var b) { return g.conv1d_valid(a, b); }));
    cases.push_back(unary_case("shift2d", {5, 6}, {5, 6}, [](ad::Graph& g, ad::Var x) { return g.shift2d(x, 1, -2); }));
    cases.push_back(binary_case("stack", {2, 3}, {2, 3}, {2, 2, 3}, [](ad::Graph& g, ad::Var a, ad::Var b) {
        const ad::Var items[] = {a, b};
        return g.stack(items);
    }));
    // Stack entries separated so the minimum is unique by a margin.
    cases.push_back(Case{"reduce_min_indexed", [](std::uint64_t seed) {
                             Sampler s(seed);
                             const std::size_t T = 4, P = 9;
                             Tensor x(Shape{T, 3, 3});
                             for (std::size_t p = 0; p < P; ++p) {
                                 std::vector<double> col(T);
                                 bool ok = false;
                                 while (!ok) {
                                     for (auto& v : col) v = s.uniform();
                                     auto sorted = col;
                                     std::sort(sorted.begin(), sorted.end());
                                     ok = sorted[1] - sorted[0] > 1e-3;
                                 }
                                 for (std::size_t t = 0; t < T; ++t) x[t * P + p] = col[t];
                             }
                             ad::ParameterSet ps;
                             ps.add("stack", x);
                             Tensor w = s.tensor({3, 3});
                             LossBuilder b = [w](ad::Graph& g, const ad::ParameterSet& p) {
                                 return weighted_sum(g, g.reduce_min_indexed(g.param(p[0])), w);
                             };
                             return std::pair{std::move(ps), b};
                         }});
    cases.push_back(unary_case("stable_softmax", {6}, {6}, [](ad::Graph& g, ad::Var x) { return g.stable_softmax(x); }));
    for (std::size_t d = 1; d <= 3; ++d) {
        cases.push_back(Case{"mat_inverse_small_d" + std::to_string(d), [d](std::uint64_t seed) {
                                 Sampler s(seed);
                                 // Diagonally dominant keeps |det| well away from zero.
                                 Tensor a = s.tensor({d, d});
                                 for (std::size_t i = 0; i < d; ++i) a.at(i, i) += (a.at(i, i) >= 0 ? 2.0 : -2.0);
                                 ad::ParameterSet ps;
                                 ps.add("a", a);
                                 Tensor w = s.tensor({d, d});
                                 LossBuilder b = [w](ad::Graph& g, const ad::ParameterSet& p) {
                                     return weighted_sum(g, g.mat_inverse_small(g.param(p[0])), w);
                                 };
                                 return std::pair{std::move(ps), b};
                             }});
    }
    cases.push_back(unary_case("sum", {3, 3}, {1}, [](ad::Graph& g, ad::Var x) { return g.sum(x); }));
    cases.push_back(unary_case("mean", {3, 3}, {1}, [](ad::Graph& g, ad::Var x) { return g.mean(x); }));
    cases.push_back(unary_case("index", {8}, {1}, [](ad::Graph& g, ad::Var x) { return g.index(x, 5); }));
    cases.push_back(unary_case("slice", {3, 2, 4}, {2, 4}, [](ad::Graph& g, ad::Var x) { return g.slice(x, 1); }));
    cases.push_back(unary_case("reshape", {2, 6}, {3, 4}, [](ad::Graph& g, ad::Var x) { return g.reshape(x, {3, 4}); }));
    // Composite: Mahalanobis form (x-y)^T A (x-y).
    cases.push_back(Case{"quadratic_form", [](std::uint64_t seed) {
                             Sampler s(seed);
                             ad::ParameterSet ps;
                             ps.add("A", s.tensor({3, 3}));
                             ps.add("x", s.tensor({3, 1}));
                             ps.add("y", s.tensor({3, 1}));
                             LossBuilder b = [](ad::Graph& g, const ad::ParameterSet& p) {
                                 ad::Var d = g.sub(g.param(p[1]), g.param(p[2]));
                                 return g.sum(g.matmul(g.transpose(d), g.matmul(g.param(p[0]), d)));
                             };
                             return std::pair{std::move(ps), b};
                         }});
    return cases;
}

Case faulty_case() {
    return Case{"faulty_square_fixture", [](std::uint64_t seed) {
                    Sampler s(seed);
                    ad::ParameterSet ps;
                    ps.add("x", s.tensor({4}));
                    LossBuilder b = [](ad::Graph& g, const ad::ParameterSet& p) {
                        ad::Var x = g.param(p[0]);
                        Tensor y = x.value();
                        for (auto& v : y.raw()) v = v * v;
                        const ad::Var ins[] = {x};
                        // Wrong on purpose: d(x^2)/dx reported as x instead of 2x.
                        ad::Var out = g.custom("faulty_square", ins, y,
                                               [](std::span<const Tensor* const> in, const Tensor&, const Tensor& ga,
                                                  std::span<Tensor* const> adj) {
                                                   for (std::size_t i = 0; i < ga.size(); ++i)
                                                       (*adj[0])[i] += ga[i] * (*in[0])[i];
                                               });
                        return g.sum(out);
                    };
                    return std::pair{std::move(ps), b};
                },
                10};
}

std::vector<CaseResult> run(const std::vector<Case>& cases, std::uint64_t seed) {
    std::vector<CaseResult> out;
    std::mt19937_64 seeds(seed);
    for (const auto& c : cases) {
        CaseResult r{c.name, c.instances, 0.0, c.tolerance};
        for (int i = 0; i < c.instances; ++i) {
            auto [params, build] = c.make(seeds());
            r.max_rel_error = std::max(r.max_rel_error, check(build, params));
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace heurnet::gradcheck
