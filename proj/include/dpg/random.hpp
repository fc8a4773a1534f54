// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

#include "dpg/tensor.hpp"

namespace dpg {

/// Counter-based random stream. A stream is identified by a 64-bit key that
/// is derived from the root seed and a path of (label, index) pairs, so any
/// substream can be reconstructed without touching its siblings. Draws from a
/// given (seed, path) are identical across runs and thread schedules.
class RandomStream {
public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t seed);

    /// Child stream for (label, index). Does not advance this stream.
    RandomStream substream(std::string_view label, std::uint64_t index) const;

    std::uint64_t key() const { return key_; }

    // UniformRandomBitGenerator interface (SplitMix64 over a counter).
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    double uniform();
    double normal();
    std::uint64_t poisson(double rate);

private:
    struct FromKey {};
    RandomStream(FromKey, std::uint64_t key);

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Tensor of i.i.d. standard normals with the given shape.
Tensor draw_normal(RandomStream& stream, const Shape& shape);
/// Independent Poisson counts, one per entry of `rates`. Throws on a negative rate.
Tensor draw_poisson(RandomStream& stream, const Tensor& rates);

std::uint64_t mix64(std::uint64_t z);

}  // namespace dpg
