// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "dpg/tensor.hpp"

namespace dpg {

using ComplexPlane = std::vector<std::complex<double>>;

/// Unnormalized 2-D DFT of an H x W plane (row-major), sign -1 in the exponent.
ComplexPlane dft2(const ComplexPlane& plane, std::size_t height, std::size_t width);
/// Conjugate transpose of dft2 (unnormalized, sign +1). idft = adjoint / (H*W).
ComplexPlane dft2_adjoint(const ComplexPlane& plane, std::size_t height, std::size_t width);

/// Entry-wise modulus of the unnormalized 2-D DFT of a [1,H,W] image.
Tensor dft2_magnitude(const Tensor& image);

}  // namespace dpg
