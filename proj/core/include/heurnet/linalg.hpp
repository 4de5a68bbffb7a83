#pragma once

#include "heurnet/tensor.hpp"

#include <stdexcept>
#include <string>

// Plain-value kernels shared by the autodiff graph and the non-differentiable
// baselines, so both paths perform the same floating-point operations.
namespace heurnet::linalg {

/// Raised when a closed-form inverse is requested for |det| <= eps.
class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(double det, double eps);
    double det() const { return det_; }

private:
    double det_;
};

inline constexpr double kDefaultDetEps = 1e-12;

/// a (m x k) times b (k x n). b may be rank 1, in which case it is a column
/// and the result is rank 1 of length m.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

double determinant(const Tensor& a);

/// Adjugate over determinant, d <= 3. Throws SingularMatrixError.
Tensor inverse_small(const Tensor& a, double eps = kDefaultDetEps);

/// Cross-correlation over the valid region.
Tensor conv2d_valid(const Tensor& input, const Tensor& kernel);
Tensor conv1d_valid(const Tensor& input, const Tensor& kernel);

/// Translate an H x W image by (di, dj); vacated pixels are zero.
Tensor shift2d(const Tensor& x, int di, int dj);

}  // namespace heurnet::linalg
