#pragma once

#include "heurnet/linalg.hpp"
#include "heurnet/tensor.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Eager tape-based reverse-mode differentiation.
//
// Every op computes its value immediately and appends a node to the Graph.
// Inputs always reference earlier nodes, so the tape is topologically ordered
// and backward() is a single reverse sweep.
namespace heurnet::ad {

struct Parameter {
    std::string name;
    Tensor value;
    bool trainable = true;
};

/// Named parameters of a model; names are unique.
class ParameterSet {
public:
    Parameter& add(std::string name, Tensor value, bool trainable = true);
    Parameter& add(Parameter p) { return add(std::move(p.name), std::move(p.value), p.trainable); }

    std::size_t size() const { return params_.size(); }
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    /// Position of p in this set, or size() if p is not a member.
    std::size_t index_of(const Parameter* p) const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    /// Zero tensors shaped like every parameter, in set order.
    std::vector<Tensor> zero_grads() const;

private:
    std::vector<Parameter> params_;
};

enum class Op : std::uint8_t {
    Constant,
    Param,
    Add,
    Sub,
    Mul,
    Neg,
    Abs,
    Square,
    Scale,
    MatMul,
    Transpose,
    Conv2dValid,
    Conv1dValid,
    Shift2d,
    Stack,
    ReduceMinIndexed,
    Softmax,
    Inverse,
    Sum,
    Mean,
    Index,
    Slice,
    Reshape,
    Custom,
};

const char* op_name(Op op);

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
struct Var {
    Graph* graph = nullptr;
    std::uint32_t id = 0;

    const Tensor& value() const;
    double item() const { return value().item(); }
};

/// Backward rule for a custom node: given the upstream adjoint, add the
/// contributions to each input adjoint.
using CustomBackward = std::function<void(std::span<const Tensor* const> inputs, const Tensor& output,
                                          const Tensor& out_adj, std::span<Tensor* const> in_adj)>;

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    Var constant(double v) { return constant(Tensor::scalar(v)); }
    /// Leaf bound to a parameter; gradients are collected per parameter.
    Var param(const Parameter& p);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var neg(Var a);
    Var abs(Var a);
    Var square(Var a);
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var conv2d_valid(Var input, Var kernel);
    Var conv1d_valid(Var input, Var kernel);
    Var shift2d(Var x, int di, int dj);
    /// Stacks equally shaped values along a new leading axis.
    Var stack(std::span<const Var> items);
    /// Minimum over the leading axis. Ties resolve to the lowest index.
    Var reduce_min_indexed(Var stack);
    Var stable_softmax(Var z);
    Var mat_inverse_small(Var a, double eps = linalg::kDefaultDetEps);
    Var sum(Var a);
    Var mean(Var a);
    Var index(Var a, std::size_t flat);
    /// a[i] along the leading axis (rank drops by one).
    Var slice(Var a, std::size_t i);
    Var reshape(Var a, Shape shape);
    Var custom(std::string name, std::span<const Var> inputs, Tensor value, CustomBackward backward);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    /// Argmin indices recorded by reduce_min_indexed.
    const std::vector<std::uint32_t>& indices(Var v) const;
    Op op(Var v) const { return nodes_.at(v.id).op; }
    std::span<const std::uint32_t> inputs(Var v) const { return nodes_.at(v.id).inputs; }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse sweep from a scalar loss. Throws ShapeError for non-scalar loss.
    void backward(Var loss);
    /// Adjoint after backward(); zeros if the node received no gradient.
    Tensor adjoint(Var v) const;
    /// Gradients for every parameter in `params` (set order). Parameters not
    /// bound to this graph get zeros.
    std::vector<Tensor> gradients(const ParameterSet& params) const;
    /// Adds the parameter gradients into `acc` (aligned with `params`).
    void accumulate_gradients(const ParameterSet& params, std::vector<Tensor>& acc) const;

private:
    struct Node {
        Op op = Op::Constant;
        std::vector<std::uint32_t> inputs;
        Tensor value;
        Tensor adj;
        bool has_adj = false;
        double scalar = 0.0;
        int i0 = 0;
        int i1 = 0;
        const Parameter* param = nullptr;
        std::vector<std::uint32_t> argmin;
        std::shared_ptr<CustomBackward> custom;
        std::string label;
    };

    Var push(Node node);
    Tensor& adj_slot(std::uint32_t id);
    void backprop_node(std::uint32_t id);
    const Tensor& val(Var v) const;

    std::deque<Node> nodes_;  // stable references across push_back
    std::vector<std::uint32_t> param_nodes_;
    bool backward_done_ = false;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);

}  // namespace heurnet::ad
