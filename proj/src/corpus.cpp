// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dpg/random.hpp"

namespace dpg {

Tensor toy_image(std::size_t index) {
    if (index >= kToyCorpusSize) throw std::out_of_range("toy corpus index " + std::to_string(index));
    constexpr std::size_t n = kToyImageSide;
    RandomStream rng = RandomStream(0x70C0).substream("image", index);
    const double lo = 0.1 * rng.uniform();
    const double hi = 0.9 + 0.1 * rng.uniform();
    Tensor img = Tensor::image(1, n, n);

    const std::size_t family = index % 4;
    const double a = rng.uniform();
    const double b = rng.uniform();
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const double fx = static_cast<double>(x) + 0.5;
            const double fy = static_cast<double>(y) + 0.5;
            double t = 0.0;
            switch (family) {
                case 0: {  // oriented stripes
                    const double angle = std::numbers::pi * a;
                    const double period = 3.0 + 5.0 * b;
                    const double u = fx * std::cos(angle) + fy * std::sin(angle);
                    t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u / period);
                    break;
                }
                case 1: {  // checkerboard
                    const auto cell = static_cast<std::size_t>(2 + std::floor(4.0 * a));
                    const auto shift = static_cast<std::size_t>(std::floor(cell * b));
                    t = (((x + shift) / cell + (y + shift) / cell) % 2 == 0) ? 1.0 : 0.0;
                    break;
                }
                case 2: {  // disk
                    const double cx = 4.0 + 8.0 * a;
                    const double cy = 4.0 + 8.0 * b;
                    const double radius = 3.0 + 3.0 * std::fmod(a + b, 1.0);
                    const double d = std::hypot(fx - cx, fy - cy);
                    t = std::clamp(radius - d + 0.5, 0.0, 1.0);
                    break;
                }
                default: {  // linear ramp
                    const double angle = 2.0 * std::numbers::pi * a;
                    const double u = (fx - 8.0) * std::cos(angle) + (fy - 8.0) * std::sin(angle);
                    t = std::clamp(0.5 + u / (8.0 + 8.0 * b), 0.0, 1.0);
                    break;
                }
            }
            img.at(0, y, x) = lo + (hi - lo) * t;
        }
    }
    return img;
}

std::vector<Tensor> toy_corpus() {
    std::vector<Tensor> images;
    images.reserve(kToyCorpusSize);
    for (std::size_t k = 0; k < kToyCorpusSize; ++k) images.push_back(toy_image(k));
    return images;
}

}  // namespace dpg
