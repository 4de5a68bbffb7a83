#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace heurnet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major array of doubles.
///
/// A Tensor with an empty shape is a scalar holding one value. Every
/// dimension is positive, so `data().size() == shape_size(shape())` always.
class Tensor {
public:
    Tensor() : shape_{}, data_(1, 0.0) {}
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor vector(std::initializer_list<double> v);
    static Tensor vector(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> v);
    static Tensor identity(std::size_t n);
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;
    bool is_scalar() const { return data_.size() == 1; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }
    double item() const;

    Tensor reshaped(Shape shape) const;

    bool all_finite() const;
    double max_abs() const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Same shape and bit-identical payload (distinguishes -0.0 and NaN payloads).
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace heurnet
