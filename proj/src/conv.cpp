// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/conv.hpp"

#include <stdexcept>

namespace dpg {
namespace {

void check_kernel(const Tensor& image, const Tensor& kernel) {
    if (image.rank() != 3) throw ShapeError("conv2d expects a [C,H,W] image, got " + shape_to_string(image.shape()));
    if (kernel.rank() != 2 || kernel.shape()[0] != kernel.shape()[1]) {
        throw ShapeError("conv2d expects a square [k,k] kernel, got " + shape_to_string(kernel.shape()));
    }
    if (kernel.shape()[0] % 2 == 0) {
        throw std::invalid_argument("conv2d kernel size must be odd, got " + std::to_string(kernel.shape()[0]));
    }
}

// Calls fn(out_index, in_index, tap) for every (output pixel, kernel tap) pair.
template <typename Fn>
void for_each_tap(const Tensor& image, const Tensor& kernel, Boundary boundary, Fn&& fn) {
    const std::size_t channels = image.channels();
    const std::size_t height = image.height();
    const std::size_t width = image.width();
    const std::size_t k = kernel.shape()[0];
    const long long half = static_cast<long long>(k / 2);
    for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t plane = c * height * width;
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const std::size_t out = plane + y * width + x;
                for (std::size_t u = 0; u < k; ++u) {
                    const std::size_t sy =
                        boundary_index(static_cast<long long>(y) + static_cast<long long>(u) - half, height, boundary);
                    for (std::size_t v = 0; v < k; ++v) {
                        const std::size_t sx = boundary_index(
                            static_cast<long long>(x) + static_cast<long long>(v) - half, width, boundary);
                        fn(out, plane + sy * width + sx, kernel[u * k + v]);
                    }
                }
            }
        }
    }
}

}  // namespace

std::size_t boundary_index(long long pos, std::size_t n, Boundary boundary) {
    const long long len = static_cast<long long>(n);
    if (boundary == Boundary::periodic) {
        long long r = pos % len;
        return static_cast<std::size_t>(r < 0 ? r + len : r);
    }
    const long long period = 2 * len;
    long long r = pos % period;
    if (r < 0) r += period;
    return static_cast<std::size_t>(r < len ? r : period - 1 - r);
}

Tensor conv2d(const Tensor& image, const Tensor& kernel, Boundary boundary) {
    check_kernel(image, kernel);
    Tensor out(image.shape());
    for_each_tap(image, kernel, boundary,
                 [&](std::size_t o, std::size_t i, double w) { out[o] += w * image[i]; });
    return out;
}

Tensor conv2d_adjoint(const Tensor& image, const Tensor& kernel, Boundary boundary) {
    check_kernel(image, kernel);
    Tensor out(image.shape());
    for_each_tap(image, kernel, boundary,
                 [&](std::size_t o, std::size_t i, double w) { out[i] += w * image[o]; });
    return out;
}

Tensor flip_kernel(const Tensor& kernel) {
    Tensor out(kernel.shape());
    const std::size_t n = kernel.size();
    for (std::size_t k = 0; k < n; ++k) out[k] = kernel[n - 1 - k];
    return out;
}

Conv2dPlan::Conv2dPlan(std::size_t height, std::size_t width, Tensor kernel, Boundary boundary)
    : kernel_(std::move(kernel)), boundary_(boundary), plane_(height * width) {
    const Tensor probe = Tensor::image(1, height, width);
    check_kernel(probe, kernel_);
    if (kernel_.size() <= plane_) return;
    matrix_.assign(plane_ * plane_, 0.0);
    for_each_tap(probe, kernel_, boundary_,
                 [&](std::size_t o, std::size_t i, double w) { matrix_[o * plane_ + i] += w; });
}

Tensor Conv2dPlan::apply(const Tensor& image) const {
    if (!dense()) return conv2d(image, kernel_, boundary_);
    check_kernel(image, kernel_);
    if (image.height() * image.width() != plane_) throw ShapeError("Conv2dPlan: plane size mismatch");
    Tensor out(image.shape());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const double* in = image.values().data() + c * plane_;
        double* dst = out.values().data() + c * plane_;
        for (std::size_t o = 0; o < plane_; ++o) {
            const double* row = matrix_.data() + o * plane_;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane_; ++i) acc += row[i] * in[i];
            dst[o] = acc;
        }
    }
    return out;
}

Tensor Conv2dPlan::adjoint(const Tensor& image) const {
    if (!dense()) return conv2d_adjoint(image, kernel_, boundary_);
    check_kernel(image, kernel_);
    if (image.height() * image.width() != plane_) throw ShapeError("Conv2dPlan: plane size mismatch");
    Tensor out(image.shape());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const double* in = image.values().data() + c * plane_;
        double* dst = out.values().data() + c * plane_;
        for (std::size_t o = 0; o < plane_; ++o) {
            const double* row = matrix_.data() + o * plane_;
            const double v = in[o];
            for (std::size_t i = 0; i < plane_; ++i) dst[i] += row[i] * v;
        }
    }
    return out;
}

}  // namespace dpg
