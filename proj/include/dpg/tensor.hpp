// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpg {

/// Raised when two tensors (or a tensor and an operator) disagree on shape.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles. Either a flat vector [d] or an image
/// [C, H, W]; other ranks are accepted but only those two are used.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::initializer_list<double> values);
    static Tensor vector(std::vector<double> values);
    static Tensor image(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    bool empty() const { return data_.empty(); }

    // Image accessors; valid only for rank-3 tensors.
    std::size_t channels() const;
    std::size_t height() const;
    std::size_t width() const;

    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }
    double& at(std::size_t c, std::size_t y, std::size_t x);
    double at(std::size_t c, std::size_t y, std::size_t x) const;

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& data() const { return data_; }

    Tensor reshaped(Shape shape) const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double s);
    /// this += s * other
    Tensor& axpy(double s, const Tensor& other);

    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double norm2_squared(const Tensor& a);
double norm1(const Tensor& a);
double norm_inf(const Tensor& a);
double sum(const Tensor& a);

}  // namespace dpg
