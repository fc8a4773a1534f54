// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/random.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpg {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : key_(mix64(seed + kGolden)) {}

RandomStream::RandomStream(FromKey, std::uint64_t key) : key_(key) {}

RandomStream RandomStream::substream(std::string_view label, std::uint64_t index) const {
    const std::uint64_t tag = mix64(fnv1a(label) ^ mix64(index + kGolden));
    return RandomStream(FromKey{}, mix64(key_ ^ tag) + kGolden * 3);
}

RandomStream::result_type RandomStream::operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double RandomStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RandomStream::normal() { return normal_(*this); }

std::uint64_t RandomStream::poisson(double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw std::invalid_argument("poisson rate must be finite and non-negative, got " + std::to_string(rate));
    }
    if (rate == 0.0) return 0;
    std::poisson_distribution<std::uint64_t> dist(rate);
    return dist(*this);
}

Tensor draw_normal(RandomStream& stream, const Shape& shape) {
    Tensor out(shape);
    for (double& v : out.values()) v = stream.normal();
    return out;
}

Tensor draw_poisson(RandomStream& stream, const Tensor& rates) {
    Tensor out(rates.shape());
    for (std::size_t k = 0; k < rates.size(); ++k) out[k] = static_cast<double>(stream.poisson(rates[k]));
    return out;
}

}  // namespace dpg
