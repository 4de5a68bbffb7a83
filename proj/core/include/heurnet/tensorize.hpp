#pragma once

#include "heurnet/autodiff.hpp"

#include <functional>
#include <optional>
#include <string>

// Builders that turn fixed constants and control flow of a heuristic into
// trainable graph structure, each recovering the original computation at a
// known parameter value.
namespace heurnet::tensorize {

/// Trainable d x d matrix initialized to the identity.
ad::Parameter identity_dense(std::string name, std::size_t d);

/// (x - y)^T A (x - y) for column or flat vectors x, y of length d.
ad::Var mahalanobis(ad::Graph& g, ad::Var A, ad::Var x, ad::Var y);

/// Trainable scalar initialized to exactly 1.0 or 0.0 from a branch's truth value.
ad::Parameter gate_weight(std::string name, bool truth);

/// w * on_true + (1 - w) * on_false. Binary w reproduces the branch exactly
/// as long as the discarded branch is finite.
ad::Var gate_merge(ad::Graph& g, ad::Var w, ad::Var on_true, ad::Var on_false);

/// Convolution kernel standing in for a (block-)Toeplitz operator; the dense
/// matrix is never stored.
struct ToeplitzParam {
    Tensor kernel;  // length k, or kh x kw
};

/// Valid-region application of the Toeplitz operator defined by `kernel`
/// (rank 1 or 2, matching x).
ad::Var toeplitz_apply(ad::Graph& g, ad::Var kernel, ad::Var x);

/// Dense matrix of the operator applied to a flattened input of
/// `input_shape`: rows are valid output positions in row-major order.
Tensor toeplitz_dense(const Tensor& kernel, const Shape& input_shape);

using StepBuilder = std::function<ad::Var(ad::Graph&, ad::Var state, int iteration)>;
/// Convergence test on the current state value.
using SettlePredicate = std::function<bool(const Tensor& state)>;

/// Applies `step` `count` times, threading the state. With a settle
/// predicate, each step is wrapped in gate_merge(indicator, previous, next)
/// where the indicator is a constant 0/1 evaluated on the previous state, so
/// a settled state is carried forward unchanged.
ad::Var unroll(ad::Graph& g, ad::Var init, int count, const StepBuilder& step,
               const std::optional<SettlePredicate>& settle = std::nullopt);

}  // namespace heurnet::tensorize
