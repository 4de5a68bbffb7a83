#include "heurnet/tensorize.hpp"

#include <stdexcept>

namespace heurnet::tensorize {

ad::Parameter identity_dense(std::string name, std::size_t d) {
    if (d == 0) throw std::invalid_argument("identity_dense: d must be >= 1");
    return ad::Parameter{std::move(name), Tensor::identity(d), true};
}

ad::Var mahalanobis(ad::Graph& g, ad::Var A, ad::Var x, ad::Var y) {
    const std::size_t d = A.value().dim(0);
    ad::Var diff = g.reshape(g.sub(x, y), Shape{d, 1});
    return g.reshape(g.matmul(g.transpose(diff), g.matmul(A, diff)), Shape{});
}

ad::Parameter gate_weight(std::string name, bool truth) {
    return ad::Parameter{std::move(name), Tensor::scalar(truth ? 1.0 : 0.0), true};
}

ad::Var gate_merge(ad::Graph& g, ad::Var w, ad::Var on_true, ad::Var on_false) {
    if (on_true.value().shape() != on_false.value().shape())
        throw ShapeError("gate_merge: branch shapes differ, " + shape_str(on_true.value().shape()) + " vs " +
                         shape_str(on_false.value().shape()));
    if (!w.value().is_scalar()) throw ShapeError("gate_merge: gate weight must be scalar");
    ad::Var keep = g.mul(w, on_true);
    ad::Var other = g.mul(g.sub(g.constant(1.0), w), on_false);
    return g.add(keep, other);
}

ad::Var toeplitz_apply(ad::Graph& g, ad::Var kernel, ad::Var x) {
    const auto kr = kernel.value().rank(), xr = x.value().rank();
    if (kr != xr)
        throw ShapeError("toeplitz_apply: kernel " + shape_str(kernel.value().shape()) + " and input " +
                         shape_str(x.value().shape()) + " have different rank");
    if (kr == 1) return g.conv1d_valid(x, kernel);
    if (kr == 2) return g.conv2d_valid(x, kernel);
    throw ShapeError("toeplitz_apply: only 1-D and 2-D operators are supported");
}

Tensor toeplitz_dense(const Tensor& kernel, const Shape& input_shape) {
    if (kernel.rank() != input_shape.size())
        throw ShapeError("toeplitz_dense: kernel rank does not match input rank");
    if (kernel.rank() == 1) {
        const std::size_t n = input_shape[0], k = kernel.size();
        if (k > n) throw ShapeError("toeplitz_dense: kernel longer than input");
        Tensor m(Shape{n - k + 1, n});
        for (std::size_t i = 0; i + k <= n; ++i)
            for (std::size_t u = 0; u < k; ++u) m.at(i, i + u) = kernel[u];
        return m;
    }
    if (kernel.rank() == 2) {
        const std::size_t H = input_shape[0], W = input_shape[1], kh = kernel.dim(0), kw = kernel.dim(1);
        if (kh > H || kw > W) throw ShapeError("toeplitz_dense: kernel larger than input");
        const std::size_t oh = H - kh + 1, ow = W - kw + 1;
        Tensor m(Shape{oh * ow, H * W});
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j)
                for (std::size_t u = 0; u < kh; ++u)
                    for (std::size_t v = 0; v < kw; ++v) m.at(i * ow + j, (i + u) * W + (j + v)) = kernel.at(u, v);
        return m;
    }
    throw ShapeError("toeplitz_dense: only 1-D and 2-D operators are supported");
}

ad::Var unroll(ad::Graph& g, ad::Var init, int count, const StepBuilder& step,
               const std::optional<SettlePredicate>& settle) {
    if (count < 1) throw std::invalid_argument("unroll: count must be >= 1");
    ad::Var state = init;
    for (int it = 0; it < count; ++it) {
        ad::Var next = step(g, state, it);
        if (settle) {
            const bool settled = (*settle)(state.value());
            ad::Var w = g.constant(settled ? 1.0 : 0.0);
            state = gate_merge(g, w, state, next);
        } else {
            state = next;
        }
    }
    return state;
}

}  // namespace heurnet::tensorize
