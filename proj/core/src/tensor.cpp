#include "heurnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace heurnet {

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

static void check_dims(const Shape& shape) {
    for (auto d : shape)
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_dims(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims(shape_);
    if (data_.size() != shape_size(shape_))
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
}

Tensor Tensor::vector(std::initializer_list<double> v) { return vector(std::vector<double>(v)); }

Tensor Tensor::vector(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> v) {
    return Tensor(Shape{rows, cols}, std::vector<double>(v));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
    return shape_[axis];
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor of shape " + shape_str(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace heurnet
