#pragma once

#include "heurnet/autodiff.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace heurnet::gradcheck {

inline constexpr double kDefaultStep = 1e-5;

/// Central differences (f(w+h) - f(w-h)) / 2h for every coordinate of every
/// trainable parameter. Parameters are restored afterwards. Frozen parameters
/// get zero gradients.
std::vector<Tensor> finite_diff_gradient(const std::function<double()>& f, ad::ParameterSet& params,
                                         double h = kDefaultStep);

/// |a - b| / max(1, |a|, |b|): relative for large gradients, absolute near 0.
double rel_error(double a, double b);
double max_rel_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b);

/// Builds a graph for the given parameters and returns the scalar loss node.
using LossBuilder = std::function<ad::Var(ad::Graph&, const ad::ParameterSet&)>;

/// Max relative error between backward() and central differences.
double check(const LossBuilder& build, ad::ParameterSet& params, double h = kDefaultStep);

struct CaseResult {
    std::string name;
    int instances = 0;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass() const { return max_rel_error < tolerance; }
};

/// A named family of random instances. `make(rng_seed)` returns the params and
/// a builder for one instance.
struct Case {
    std::string name;
    std::function<std::pair<ad::ParameterSet, LossBuilder>(std::uint64_t seed)> make;
    int instances = 100;
    double tolerance = 1e-6;
};

/// Every differentiable tensor-core op, drawn U[-1,1] away from kinks.
std::vector<Case> op_cases();

/// A deliberately wrong backward rule, for negative-control runs.
Case faulty_case();

std::vector<CaseResult> run(const std::vector<Case>& cases, std::uint64_t seed);

}  // namespace heurnet::gradcheck
