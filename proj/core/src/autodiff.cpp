#include "heurnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace heurnet::ad {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Tensor value, bool trainable) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    params_.push_back(Parameter{std::move(name), std::move(value), trainable});
    return params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

Parameter& ParameterSet::at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter named '" + name + "'");
}

const Parameter& ParameterSet::at(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter named '" + name + "'");
}

std::size_t ParameterSet::index_of(const Parameter* p) const {
    if (params_.empty() || p < params_.data() || p >= params_.data() + params_.size()) return params_.size();
    return static_cast<std::size_t>(p - params_.data());
}

std::vector<Tensor> ParameterSet::zero_grads() const {
    std::vector<Tensor> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.push_back(Tensor::zeros_like(p.value));
    return g;
}

// ---------------------------------------------------------------------------

const char* op_name(Op op) {
    switch (op) {
        case Op::Constant: return "constant";
        case Op::Param: return "param";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Neg: return "neg";
        case Op::Abs: return "abs";
        case Op::Square: return "square";
        case Op::Scale: return "scale";
        case Op::MatMul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::Conv2dValid: return "conv2d_valid";
        case Op::Conv1dValid: return "conv1d_valid";
        case Op::Shift2d: return "shift2d";
        case Op::Stack: return "stack";
        case Op::ReduceMinIndexed: return "reduce_min_indexed";
        case Op::Softmax: return "stable_softmax";
        case Op::Inverse: return "mat_inverse_small";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::Index: return "index";
        case Op::Slice: return "slice";
        case Op::Reshape: return "reshape";
        case Op::Custom: return "custom";
    }
    return "?";
}

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::push(Node node) {
    if (backward_done_) throw std::logic_error("graph is sealed after backward()");
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::val(Var v) const {
    if (v.graph != this) throw std::invalid_argument("variable belongs to a different graph");
    return nodes_.at(v.id).value;
}

const std::vector<std::uint32_t>& Graph::indices(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (n.op != Op::ReduceMinIndexed) throw std::invalid_argument("indices() requires a reduce_min_indexed node");
    return n.argmin;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

enum class Bcast { None, LeftScalar, RightScalar };

Bcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Bcast::None;
    if (a.is_scalar()) return Bcast::LeftScalar;
    if (b.is_scalar()) return Bcast::RightScalar;
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class F>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f) {
    const Bcast k = broadcast_kind(op, a, b);
    Tensor out(k == Bcast::LeftScalar ? b.shape() : a.shape());
    auto& o = out.raw();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double x = k == Bcast::LeftScalar ? a[0] : a[i];
        const double y = k == Bcast::RightScalar ? b[0] : b[i];
        o[i] = f(x, y);
    }
    return out;
}

template <class F>
Tensor unary(const Tensor& a, F f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

}  // namespace

Var Graph::constant(Tensor value) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Graph::param(const Parameter& p) {
    Node n;
    n.op = Op::Param;
    n.value = p.value;
    n.param = &p;
    n.label = p.name;
    Var v = push(std::move(n));
    param_nodes_.push_back(v.id);
    return v;
}

Var Graph::add(Var a, Var b) {
    Node n;
    n.op = Op::Add;
    n.inputs = {a.id, b.id};
    n.value = binary("add", val(a), val(b), [](double x, double y) { return x + y; });
    return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
    Node n;
    n.op = Op::Sub;
    n.inputs = {a.id, b.id};
    n.value = binary("sub", val(a), val(b), [](double x, double y) { return x - y; });
    return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
    Node n;
    n.op = Op::Mul;
    n.inputs = {a.id, b.id};
    n.value = binary("mul", val(a), val(b), [](double x, double y) { return x * y; });
    return push(std::move(n));
}

Var Graph::neg(Var a) {
    Node n;
    n.op = Op::Neg;
    n.inputs = {a.id};
    n.value = unary(val(a), [](double x) { return -x; });
    return push(std::move(n));
}

Var Graph::abs(Var a) {
    Node n;
    n.op = Op::Abs;
    n.inputs = {a.id};
    n.value = unary(val(a), [](double x) { return std::abs(x); });
    return push(std::move(n));
}

Var Graph::square(Var a) {
    Node n;
    n.op = Op::Square;
    n.inputs = {a.id};
    n.value = unary(val(a), [](double x) { return x * x; });
    return push(std::move(n));
}

Var Graph::scale(Var a, double s) {
    Node n;
    n.op = Op::Scale;
    n.inputs = {a.id};
    n.scalar = s;
    n.value = unary(val(a), [s](double x) { return x * s; });
    return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
    Node n;
    n.op = Op::MatMul;
    n.inputs = {a.id, b.id};
    n.value = linalg::matmul(val(a), val(b));
    return push(std::move(n));
}

Var Graph::transpose(Var a) {
    Node n;
    n.op = Op::Transpose;
    n.inputs = {a.id};
    n.value = linalg::transpose(val(a));
    return push(std::move(n));
}

Var Graph::conv2d_valid(Var input, Var kernel) {
    Node n;
    n.op = Op::Conv2dValid;
    n.inputs = {input.id, kernel.id};
    n.value = linalg::conv2d_valid(val(input), val(kernel));
    return push(std::move(n));
}

Var Graph::conv1d_valid(Var input, Var kernel) {
    Node n;
    n.op = Op::Conv1dValid;
    n.inputs = {input.id, kernel.id};
    n.value = linalg::conv1d_valid(val(input), val(kernel));
    return push(std::move(n));
}

Var Graph::shift2d(Var x, int di, int dj) {
    Node n;
    n.op = Op::Shift2d;
    n.inputs = {x.id};
    n.i0 = di;
    n.i1 = dj;
    n.value = linalg::shift2d(val(x), di, dj);
    return push(std::move(n));
}

Var Graph::stack(std::span<const Var> items) {
    if (items.empty()) throw ShapeError("stack: no inputs");
    const Shape& s0 = val(items[0]).shape();
    Shape shape{items.size()};
    shape.insert(shape.end(), s0.begin(), s0.end());
    Node n;
    n.op = Op::Stack;
    std::vector<double> data;
    data.reserve(shape_size(shape));
    for (const Var& v : items) {
        const Tensor& t = val(v);
        if (t.shape() != s0)
            throw ShapeError("stack: shape mismatch " + shape_str(s0) + " vs " + shape_str(t.shape()));
        data.insert(data.end(), t.raw().begin(), t.raw().end());
        n.inputs.push_back(v.id);
    }
    n.value = Tensor(std::move(shape), std::move(data));
    return push(std::move(n));
}

Var Graph::reduce_min_indexed(Var stack) {
    const Tensor& s = val(stack);
    if (s.rank() < 1) throw ShapeError("reduce_min_indexed: expected rank >= 1 stack");
    const std::size_t T = s.dim(0);
    Shape out_shape(s.shape().begin() + 1, s.shape().end());
    const std::size_t plane = shape_size(out_shape);
    Node n;
    n.op = Op::ReduceMinIndexed;
    n.inputs = {stack.id};
    n.value = Tensor(out_shape);
    n.argmin.assign(plane, 0);
    auto& v = n.value.raw();
    for (std::size_t p = 0; p < plane; ++p) v[p] = s[p];
    for (std::size_t t = 1; t < T; ++t)
        for (std::size_t p = 0; p < plane; ++p) {
            const double x = s[t * plane + p];
            if (x < v[p]) {
                v[p] = x;
                n.argmin[p] = static_cast<std::uint32_t>(t);
            }
        }
    return push(std::move(n));
}

Var Graph::stable_softmax(Var z) {
    const Tensor& t = val(z);
    if (t.rank() > 1) throw ShapeError("stable_softmax: expected a vector, got " + shape_str(t.shape()));
    if (!t.all_finite()) throw std::domain_error("stable_softmax: non-finite input");
    const double mx = *std::max_element(t.raw().begin(), t.raw().end());
    Tensor out(t.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        out[i] = std::exp(t[i] - mx);
        total += out[i];
    }
    for (auto& x : out.raw()) x /= total;
    Node n;
    n.op = Op::Softmax;
    n.inputs = {z.id};
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::mat_inverse_small(Var a, double eps) {
    Node n;
    n.op = Op::Inverse;
    n.inputs = {a.id};
    n.scalar = eps;
    n.value = linalg::inverse_small(val(a), eps);
    return push(std::move(n));
}

Var Graph::sum(Var a) {
    double s = 0.0;
    for (double x : val(a).raw()) s += x;
    Node n;
    n.op = Op::Sum;
    n.inputs = {a.id};
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

Var Graph::mean(Var a) {
    const Tensor& t = val(a);
    double s = 0.0;
    for (double x : t.raw()) s += x;
    Node n;
    n.op = Op::Mean;
    n.inputs = {a.id};
    n.value = Tensor::scalar(s / static_cast<double>(t.size()));
    return push(std::move(n));
}

Var Graph::index(Var a, std::size_t flat) {
    const Tensor& t = val(a);
    if (flat >= t.size())
        throw ShapeError("index: " + std::to_string(flat) + " out of range for " + shape_str(t.shape()));
    Node n;
    n.op = Op::Index;
    n.inputs = {a.id};
    n.i0 = static_cast<int>(flat);
    n.value = Tensor::scalar(t[flat]);
    return push(std::move(n));
}

Var Graph::slice(Var a, std::size_t i) {
    const Tensor& t = val(a);
    if (t.rank() == 0 || i >= t.dim(0))
        throw ShapeError("slice: index " + std::to_string(i) + " out of range for " + shape_str(t.shape()));
    Shape rest(t.shape().begin() + 1, t.shape().end());
    const std::size_t len = shape_size(rest);
    Node n;
    n.op = Op::Slice;
    n.inputs = {a.id};
    n.i0 = static_cast<int>(i);
    n.value = Tensor(std::move(rest), std::vector<double>(t.raw().begin() + static_cast<std::ptrdiff_t>(i * len),
                                                          t.raw().begin() + static_cast<std::ptrdiff_t>((i + 1) * len)));
    return push(std::move(n));
}

Var Graph::reshape(Var a, Shape shape) {
    Node n;
    n.op = Op::Reshape;
    n.inputs = {a.id};
    n.value = val(a).reshaped(std::move(shape));
    return push(std::move(n));
}

Var Graph::custom(std::string name, std::span<const Var> inputs, Tensor value, CustomBackward backward) {
    Node n;
    n.op = Op::Custom;
    for (const Var& v : inputs) {
        (void)val(v);
        n.inputs.push_back(v.id);
    }
    n.value = std::move(value);
    n.custom = std::make_shared<CustomBackward>(std::move(backward));
    n.label = std::move(name);
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Backward

Tensor& Graph::adj_slot(std::uint32_t id) {
    Node& n = nodes_[id];
    if (!n.has_adj) {
        n.adj = Tensor::zeros_like(n.value);
        n.has_adj = true;
    }
    return n.adj;
}

namespace {

// Accumulates g into an operand adjoint, summing when the operand was a
// broadcast scalar.
void add_into(Tensor& dst, const Tensor& g, double factor_scalar = 1.0) {
    if (dst.shape() == g.shape()) {
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor_scalar;
    } else {
        double s = 0.0;
        for (double x : g.raw()) s += x;
        dst[0] += s * factor_scalar;
    }
}

}  // namespace

void Graph::backprop_node(std::uint32_t id) {
    // Copy what we need up front: adj_slot() on inputs may not reallocate
    // nodes_, but keep references local for clarity.
    Node& n = nodes_[id];
    const Tensor& g = n.adj;
    switch (n.op) {
        case Op::Constant:
        case Op::Param:
            return;
        case Op::Add:
            add_into(adj_slot(n.inputs[0]), g);
            add_into(adj_slot(n.inputs[1]), g);
            return;
        case Op::Sub:
            add_into(adj_slot(n.inputs[0]), g);
            add_into(adj_slot(n.inputs[1]), g, -1.0);
            return;
        case Op::Mul: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            const Tensor& b = nodes_[n.inputs[1]].value;
            Tensor ga(g.shape()), gb(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double av = a.is_scalar() && !b.is_scalar() ? a[0] : a[i];
                const double bv = b.is_scalar() && !a.is_scalar() ? b[0] : b[i];
                ga[i] = g[i] * bv;
                gb[i] = g[i] * av;
            }
            add_into(adj_slot(n.inputs[0]), ga);
            add_into(adj_slot(n.inputs[1]), gb);
            return;
        }
        case Op::Neg:
            add_into(adj_slot(n.inputs[0]), g, -1.0);
            return;
        case Op::Abs: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            Tensor& d = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i)
                d[i] += a[i] > 0.0 ? g[i] : (a[i] < 0.0 ? -g[i] : 0.0);
            return;
        }
        case Op::Square: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            Tensor& d = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += 2.0 * a[i] * g[i];
            return;
        }
        case Op::Scale:
            add_into(adj_slot(n.inputs[0]), g, n.scalar);
            return;
        case Op::MatMul: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            const Tensor& b = nodes_[n.inputs[1]].value;
            const std::size_t m = a.dim(0), k = a.dim(1), cols = b.rank() == 2 ? b.dim(1) : 1;
            Tensor& da = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) acc += g[i * cols + j] * b[l * cols + j];
                    da[i * k + l] += acc;
                }
            Tensor& db = adj_slot(n.inputs[1]);
            const Tensor& a2 = nodes_[n.inputs[0]].value;
            for (std::size_t l = 0; l < k; ++l)
                for (std::size_t j = 0; j < cols; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i) acc += a2[i * k + l] * g[i * cols + j];
                    db[l * cols + j] += acc;
                }
            return;
        }
        case Op::Transpose: {
            Tensor& d = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < g.dim(0); ++i)
                for (std::size_t j = 0; j < g.dim(1); ++j) d.at(j, i) += g.at(i, j);
            return;
        }
        case Op::Conv2dValid: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            const Tensor& k = nodes_[n.inputs[1]].value;
            const std::size_t oh = g.dim(0), ow = g.dim(1), kh = k.dim(0), kw = k.dim(1);
            Tensor& din = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j)
                    for (std::size_t u = 0; u < kh; ++u)
                        for (std::size_t v = 0; v < kw; ++v) din.at(i + u, j + v) += g.at(i, j) * k.at(u, v);
            Tensor& dk = adj_slot(n.inputs[1]);
            const Tensor& in2 = nodes_[n.inputs[0]].value;
            for (std::size_t u = 0; u < kh; ++u)
                for (std::size_t v = 0; v < kw; ++v) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < oh; ++i)
                        for (std::size_t j = 0; j < ow; ++j) acc += g.at(i, j) * in2.at(i + u, j + v);
                    dk.at(u, v) += acc;
                }
            (void)in;
            return;
        }
        case Op::Conv1dValid: {
            const Tensor& k = nodes_[n.inputs[1]].value;
            Tensor& din = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i)
                for (std::size_t u = 0; u < k.size(); ++u) din[i + u] += g[i] * k[u];
            Tensor& dk = adj_slot(n.inputs[1]);
            const Tensor& in = nodes_[n.inputs[0]].value;
            for (std::size_t u = 0; u < dk.size(); ++u) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * in[i + u];
                dk[u] += acc;
            }
            return;
        }
        case Op::Shift2d: {
            // Adjoint of a zero-fill translation is the opposite translation.
            const Tensor back = linalg::shift2d(g, -n.i0, -n.i1);
            add_into(adj_slot(n.inputs[0]), back);
            return;
        }
        case Op::Stack: {
            const std::size_t plane = g.size() / n.inputs.size();
            for (std::size_t t = 0; t < n.inputs.size(); ++t) {
                Tensor& d = adj_slot(n.inputs[t]);
                for (std::size_t p = 0; p < plane; ++p) d[p] += g[t * plane + p];
            }
            return;
        }
        case Op::ReduceMinIndexed: {
            Tensor& d = adj_slot(n.inputs[0]);
            const std::size_t plane = g.size();
            for (std::size_t p = 0; p < plane; ++p) d[n.argmin[p] * plane + p] += g[p];
            return;
        }
        case Op::Softmax: {
            const Tensor& y = n.value;
            double dot = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
            Tensor& d = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < y.size(); ++i) d[i] += y[i] * (g[i] - dot);
            return;
        }
        case Op::Inverse: {
            // d(A^-1) = -A^-1 dA A^-1  =>  dL/dA = -A^-T G A^-T
            const Tensor& inv = n.value;
            const Tensor invT = linalg::transpose(inv);
            const Tensor tmp = linalg::matmul(invT, g);
            const Tensor ga = linalg::matmul(tmp, invT);
            add_into(adj_slot(n.inputs[0]), ga, -1.0);
            return;
        }
        case Op::Sum: {
            Tensor& d = adj_slot(n.inputs[0]);
            for (auto& x : d.raw()) x += g[0];
            return;
        }
        case Op::Mean: {
            Tensor& d = adj_slot(n.inputs[0]);
            const double s = g[0] / static_cast<double>(d.size());
            for (auto& x : d.raw()) x += s;
            return;
        }
        case Op::Index:
            adj_slot(n.inputs[0])[static_cast<std::size_t>(n.i0)] += g[0];
            return;
        case Op::Slice: {
            Tensor& d = adj_slot(n.inputs[0]);
            const std::size_t off = static_cast<std::size_t>(n.i0) * g.size();
            for (std::size_t i = 0; i < g.size(); ++i) d[off + i] += g[i];
            return;
        }
        case Op::Reshape: {
            Tensor& d = adj_slot(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            return;
        }
        case Op::Custom: {
            std::vector<const Tensor*> ins;
            std::vector<Tensor*> adjs;
            for (auto in : n.inputs) {
                ins.push_back(&nodes_[in].value);
                adjs.push_back(&adj_slot(in));
            }
            (*n.custom)(ins, n.value, g, adjs);
            return;
        }
    }
}

void Graph::backward(Var loss) {
    if (loss.graph != this) throw std::invalid_argument("loss belongs to a different graph");
    if (backward_done_) throw std::logic_error("backward() may only run once per graph");
    const Tensor& lv = nodes_.at(loss.id).value;
    if (lv.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
    backward_done_ = true;
    adj_slot(loss.id)[0] = 1.0;
    // Every node has only earlier inputs; slots for all nodes are allocated
    // lazily, and the vector never grows during the sweep.
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        if (!nodes_[id].has_adj) continue;
        backprop_node(id);
    }
}

Tensor Graph::adjoint(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.has_adj ? n.adj : Tensor::zeros_like(n.value);
}

std::vector<Tensor> Graph::gradients(const ParameterSet& params) const {
    auto g = params.zero_grads();
    accumulate_gradients(params, g);
    return g;
}

void Graph::accumulate_gradients(const ParameterSet& params, std::vector<Tensor>& acc) const {
    if (acc.size() != params.size()) throw ShapeError("accumulate_gradients: accumulator size mismatch");
    for (auto id : param_nodes_) {
        const Node& n = nodes_[id];
        if (!n.has_adj) continue;
        const std::size_t k = params.index_of(n.param);
        if (k == params.size()) continue;
        Tensor& dst = acc[k];
        if (dst.shape() != n.adj.shape())
            throw ShapeError("gradient shape " + shape_str(n.adj.shape()) + " does not match parameter '" +
                             params[k].name + "' " + shape_str(dst.shape()));
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.adj[i];
    }
}

// ---------------------------------------------------------------------------

Var operator+(Var a, Var b) { return a.graph->add(a, b); }
Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
Var operator-(Var a) { return a.graph->neg(a); }
Var operator+(Var a, double b) { return a.graph->add(a, a.graph->constant(b)); }
Var operator+(double a, Var b) { return b.graph->add(b.graph->constant(a), b); }
Var operator-(Var a, double b) { return a.graph->sub(a, a.graph->constant(b)); }
Var operator-(double a, Var b) { return b.graph->sub(b.graph->constant(a), b); }
Var operator*(Var a, double b) { return a.graph->scale(a, b); }
Var operator*(double a, Var b) { return b.graph->scale(b, a); }

}  // namespace heurnet::ad
