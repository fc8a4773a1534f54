// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/dft.hpp"

#include <cmath>
#include <numbers>

namespace dpg {
namespace {

ComplexPlane twiddles(std::size_t n, double sign) {
    ComplexPlane w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        w[k] = {std::cos(angle), std::sin(angle)};
    }
    return w;
}

// Separable direct transform; O(HW(H+W)) which is plenty for desk-scale images.
ComplexPlane transform(const ComplexPlane& in, std::size_t height, std::size_t width, double sign) {
    const ComplexPlane wr = twiddles(width, sign);
    const ComplexPlane wc = twiddles(height, sign);
    ComplexPlane rows(in.size());
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t kx = 0; kx < width; ++kx) {
            std::complex<double> acc{};
            for (std::size_t x = 0; x < width; ++x) acc += in[y * width + x] * wr[(kx * x) % width];
            rows[y * width + kx] = acc;
        }
    }
    ComplexPlane out(in.size());
    for (std::size_t kx = 0; kx < width; ++kx) {
        for (std::size_t ky = 0; ky < height; ++ky) {
            std::complex<double> acc{};
            for (std::size_t y = 0; y < height; ++y) acc += rows[y * width + kx] * wc[(ky * y) % height];
            out[ky * width + kx] = acc;
        }
    }
    return out;
}

}  // namespace

ComplexPlane dft2(const ComplexPlane& plane, std::size_t height, std::size_t width) {
    return transform(plane, height, width, -1.0);
}

ComplexPlane dft2_adjoint(const ComplexPlane& plane, std::size_t height, std::size_t width) {
    return transform(plane, height, width, +1.0);
}

Tensor dft2_magnitude(const Tensor& image) {
    if (image.rank() != 3 || image.channels() != 1) {
        throw ShapeError("dft2_magnitude expects a [1,H,W] image, got " + shape_to_string(image.shape()));
    }
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    ComplexPlane plane(image.values().begin(), image.values().end());
    const ComplexPlane spectrum = dft2(plane, h, w);
    Tensor out(image.shape());
    for (std::size_t k = 0; k < spectrum.size(); ++k) out[k] = std::abs(spectrum[k]);
    return out;
}

}  // namespace dpg
