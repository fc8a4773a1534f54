// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "dpg/random.hpp"

using namespace dpg;

TEST_CASE("same seed and path give identical draws") {
    RandomStream a = RandomStream(42).substream("dpg", 10).substream("mc", 3);
    RandomStream b = RandomStream(42).substream("dpg", 10).substream("mc", 3);
    CHECK(draw_normal(a, {100}) == draw_normal(b, {100}));
}

TEST_CASE("substream does not advance the parent") {
    RandomStream a(7);
    RandomStream b(7);
    (void)a.substream("x", 1);
    CHECK(a() == b());
}

TEST_CASE("distinct paths give distinct, uncorrelated sequences") {
    const RandomStream root(1);
    RandomStream a = root.substream("mc", 0);
    RandomStream b = root.substream("mc", 1);
    RandomStream c = root.substream("ddpm", 0);
    const std::size_t n = 200000;
    const Tensor xa = draw_normal(a, {n});
    const Tensor xb = draw_normal(b, {n});
    const Tensor xc = draw_normal(c, {n});
    CHECK(xa != xb);
    // Sample correlation of independent normals has sd 1/sqrt(n) ~ 0.0022.
    CHECK(std::abs(dot(xa, xb) / n) < 0.012);
    CHECK(std::abs(dot(xa, xc) / n) < 0.012);
}

TEST_CASE("normal moments over 10^6 draws") {
    RandomStream s(2024);
    const std::size_t n = 1000000;
    const Tensor x = draw_normal(s, {n});
    const double mean = sum(x) / n;
    const double var = norm2_squared(x) / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("uniform draws lie in [0, 1)") {
    RandomStream s(9);
    double lo = 1.0, hi = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const double u = s.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(lo < 1e-3);
    CHECK(hi > 1.0 - 1e-3);
}

TEST_CASE("poisson draws") {
    RandomStream s(5);
    CHECK(draw_poisson(s, Tensor({50}, 0.0)) == Tensor({50}, 0.0));
    CHECK_THROWS_AS(draw_poisson(s, Tensor::vector({1.0, -0.5})), std::invalid_argument);
    const std::size_t n = 200000;
    const Tensor counts = draw_poisson(s, Tensor({n}, 3.5));
    const double mean = sum(counts) / n;
    const double var = norm2_squared(counts) / n - mean * mean;
    // sd of the sample mean is sqrt(3.5 / n) ~ 0.0042.
    CHECK(std::abs(mean - 3.5) < 0.02);
    CHECK(std::abs(var - 3.5) < 0.1);
}
