// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "dpg/tensor.hpp"

namespace dpg {

enum class Boundary {
    reflect,   // mirror including the edge sample (a b c | c b a)
    periodic,
};

/// Maps a possibly out-of-range coordinate into [0, n).
std::size_t boundary_index(long long pos, std::size_t n, Boundary boundary);

/// Per-channel 2-D correlation of an image [C,H,W] with an odd square kernel
/// [k,k]: out(y,x) = sum_{u,v} K(u,v) * x(y+u-k/2, x+v-k/2).
Tensor conv2d(const Tensor& image, const Tensor& kernel, Boundary boundary = Boundary::reflect);

/// Exact transpose of conv2d for the same kernel and boundary. Under periodic
/// boundaries this equals conv2d with the flipped kernel; under reflect it
/// does not, because padding folds several taps onto the same pixel.
Tensor conv2d_adjoint(const Tensor& image, const Tensor& kernel, Boundary boundary = Boundary::reflect);

Tensor flip_kernel(const Tensor& kernel);

/// conv2d / conv2d_adjoint for a fixed kernel, boundary and plane size. When
/// the kernel has more taps than a plane has pixels, the folded per-plane
/// matrix is precomputed, which is cheaper and gives the same linear map.
class Conv2dPlan {
public:
    Conv2dPlan(std::size_t height, std::size_t width, Tensor kernel, Boundary boundary);

    Tensor apply(const Tensor& image) const;
    Tensor adjoint(const Tensor& image) const;
    const Tensor& kernel() const { return kernel_; }
    bool dense() const { return !matrix_.empty(); }

private:
    Tensor kernel_;
    Boundary boundary_;
    std::size_t plane_ = 0;
    std::vector<double> matrix_;  // row-major [plane, plane], empty for the direct path
};

}  // namespace dpg
