// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace dpg {

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (k > 0) out += ",";
        out += std::to_string(shape[k]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_to_string(shape_));
    }
}

Tensor Tensor::vector(std::initializer_list<double> values) { return vector(std::vector<double>(values)); }

Tensor Tensor::vector(std::vector<double> values) {
    Shape shape{values.size()};
    return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::image(std::size_t channels, std::size_t height, std::size_t width, double fill) {
    return Tensor(Shape{channels, height, width}, fill);
}

std::size_t Tensor::channels() const {
    if (rank() != 3) throw ShapeError("not an image tensor: " + shape_to_string(shape_));
    return shape_[0];
}

std::size_t Tensor::height() const {
    if (rank() != 3) throw ShapeError("not an image tensor: " + shape_to_string(shape_));
    return shape_[1];
}

std::size_t Tensor::width() const {
    if (rank() != 3) throw ShapeError("not an image tensor: " + shape_to_string(shape_));
    return shape_[2];
}

double& Tensor::at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }

double Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != size()) {
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "add");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_same_shape(*this, other, "sub");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor& Tensor::axpy(double s, const Tensor& other) {
    require_same_shape(*this, other, "axpy");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * other.data_[k];
    return *this;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out += b;
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out -= b;
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor out = a;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= b[k];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    out *= s;
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.values()) v += s;
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
    return acc;
}

double norm2_squared(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v * v;
    return acc;
}

double norm2(const Tensor& a) { return std::sqrt(norm2_squared(a)); }

double norm1(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += std::abs(v);
    return acc;
}

double norm_inf(const Tensor& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    return acc;
}

}  // namespace dpg
