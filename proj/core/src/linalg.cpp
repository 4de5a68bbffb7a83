#include "heurnet/linalg.hpp"

#include <cmath>
#include <cstdio>

namespace heurnet::linalg {

static std::string det_message(double det, double eps) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "matrix is near-singular: |det| = %.3e <= %.3e", std::abs(det), eps);
    return buf;
}

SingularMatrixError::SingularMatrixError(double det, double eps)
    : std::runtime_error(det_message(det, eps)), det_(det) {}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2))
        throw ShapeError("matmul: expected matrix x (matrix|vector), got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1);
    const std::size_t n = b.rank() == 2 ? b.dim(1) : 1;
    if (b.dim(0) != k)
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Tensor out(b.rank() == 2 ? Shape{m, n} : Shape{m});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += pa[i * k + l] * pb[l * n + j];
            po[i * n + j] = acc;
        }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected matrix, got " + shape_str(a.shape()));
    Tensor out(Shape{a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

static void check_square_small(const Tensor& a, const char* op) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1) || a.dim(0) > 3)
        throw ShapeError(std::string(op) + ": expected square matrix with d <= 3, got " + shape_str(a.shape()));
}

double determinant(const Tensor& a) {
    check_square_small(a, "determinant");
    const auto& m = a.raw();
    switch (a.dim(0)) {
        case 1: return m[0];
        case 2: return m[0] * m[3] - m[1] * m[2];
        default:
            return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                   m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
}

Tensor inverse_small(const Tensor& a, double eps) {
    check_square_small(a, "inverse_small");
    const double det = determinant(a);
    if (!(std::abs(det) > eps)) throw SingularMatrixError(det, eps);
    const auto& m = a.raw();
    const std::size_t d = a.dim(0);
    Tensor inv(Shape{d, d});
    auto& r = inv.raw();
    switch (d) {
        case 1: r[0] = 1.0 / m[0]; break;
        case 2:
            r[0] = m[3] / det;
            r[1] = -m[1] / det;
            r[2] = -m[2] / det;
            r[3] = m[0] / det;
            break;
        default:
            r[0] = (m[4] * m[8] - m[5] * m[7]) / det;
            r[1] = (m[2] * m[7] - m[1] * m[8]) / det;
            r[2] = (m[1] * m[5] - m[2] * m[4]) / det;
            r[3] = (m[5] * m[6] - m[3] * m[8]) / det;
            r[4] = (m[0] * m[8] - m[2] * m[6]) / det;
            r[5] = (m[2] * m[3] - m[0] * m[5]) / det;
            r[6] = (m[3] * m[7] - m[4] * m[6]) / det;
            r[7] = (m[1] * m[6] - m[0] * m[7]) / det;
            r[8] = (m[0] * m[4] - m[1] * m[3]) / det;
            break;
    }
    return inv;
}

Tensor conv2d_valid(const Tensor& input, const Tensor& kernel) {
    if (input.rank() != 2 || kernel.rank() != 2)
        throw ShapeError("conv2d_valid: expected 2-D input and kernel, got " + shape_str(input.shape()) + " and " +
                         shape_str(kernel.shape()));
    const std::size_t H = input.dim(0), W = input.dim(1), kh = kernel.dim(0), kw = kernel.dim(1);
    if (kh > H || kw > W)
        throw ShapeError("conv2d_valid: kernel " + shape_str(kernel.shape()) + " larger than input " +
                         shape_str(input.shape()));
    const std::size_t oh = H - kh + 1, ow = W - kw + 1;
    Tensor out(Shape{oh, ow});
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (std::size_t u = 0; u < kh; ++u)
                for (std::size_t v = 0; v < kw; ++v) acc += input.at(i + u, j + v) * kernel.at(u, v);
            out.at(i, j) = acc;
        }
    return out;
}

Tensor conv1d_valid(const Tensor& input, const Tensor& kernel) {
    if (input.rank() != 1 || kernel.rank() != 1)
        throw ShapeError("conv1d_valid: expected 1-D input and kernel, got " + shape_str(input.shape()) + " and " +
                         shape_str(kernel.shape()));
    const std::size_t n = input.size(), k = kernel.size();
    if (k > n)
        throw ShapeError("conv1d_valid: kernel " + shape_str(kernel.shape()) + " larger than input " +
                         shape_str(input.shape()));
    Tensor out(Shape{n - k + 1});
    for (std::size_t i = 0; i + k <= n; ++i) {
        double acc = 0.0;
        for (std::size_t u = 0; u < k; ++u) acc += input[i + u] * kernel[u];
        out[i] = acc;
    }
    return out;
}

Tensor shift2d(const Tensor& x, int di, int dj) {
    if (x.rank() != 2) throw ShapeError("shift2d: expected 2-D input, got " + shape_str(x.shape()));
    const int H = static_cast<int>(x.dim(0)), W = static_cast<int>(x.dim(1));
    Tensor out(x.shape());
    for (int i = 0; i < H; ++i) {
        const int si = i - di;
        if (si < 0 || si >= H) continue;
        for (int j = 0; j < W; ++j) {
            const int sj = j - dj;
            if (sj < 0 || sj >= W) continue;
            out.at(i, j) = x.at(si, sj);
        }
    }
    return out;
}

}  // namespace heurnet::linalg
