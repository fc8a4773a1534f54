// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "dpg/conv.hpp"
#include "dpg/dft.hpp"
#include "dpg/random.hpp"
#include "dpg/tensor.hpp"
#include "dpg/tensor_io.hpp"

using namespace dpg;

TEST_CASE("elementwise arithmetic") {
    CHECK(add(Tensor::vector({1, 2}), Tensor::vector({3, 4})) == Tensor::vector({4, 6}));
    CHECK(scale(Tensor::vector({1, 2}), 0.0) == Tensor::vector({0, 0}));
    CHECK(hadamard(Tensor::vector({2, 3}), Tensor::vector({4, 5})) == Tensor::vector({8, 15}));
    CHECK(sub(Tensor::vector({5, 1}), Tensor::vector({2, 3})) == Tensor::vector({3, -2}));
    CHECK(add_scalar(Tensor::vector({1, -1}), 0.5) == Tensor::vector({1.5, -0.5}));
}

TEST_CASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), ShapeError);
    CHECK_THROWS_AS(dot(Tensor::vector({1}), Tensor::image(1, 1, 1)), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("dot and norm") {
    CHECK(dot(Tensor::vector({1, 0}), Tensor::vector({0, 1})) == 0.0);
    CHECK(norm2(Tensor::vector({3, 4})) == 5.0);
    CHECK(dot(Tensor::vector({1, 2}), Tensor::vector({3, 4})) == 11.0);
    CHECK(norm1(Tensor::vector({-1, 2})) == 3.0);
    CHECK(norm_inf(Tensor::vector({-7, 2})) == 7.0);
}

TEST_CASE("dot(a, a) agrees with norm2(a)^2 on random tensors") {
    const RandomStream root(11);
    for (std::uint64_t k = 0; k < 50; ++k) {
        RandomStream s = root.substream("case", k);
        const Tensor a = draw_normal(s, {1 + k % 13, 3});
        const double n2 = norm2(a) * norm2(a);
        CHECK(std::abs(dot(a, a) - n2) <= 1e-12 * n2);
    }
}

TEST_CASE("element count equals shape product") {
    const Tensor t = Tensor::image(3, 4, 5);
    CHECK(t.size() == 60);
    CHECK(shape_numel(t.shape()) == 60);
    CHECK(t.reshaped({60}).size() == 60);
    CHECK_THROWS_AS(t.reshaped({7}), ShapeError);
}

TEST_CASE("conv2d delta kernel is the identity") {
    RandomStream s(3);
    const Tensor img = draw_normal(s, {2, 6, 7});
    Tensor delta({3, 3});
    delta[4] = 1.0;
    CHECK(conv2d(img, delta) == img);
}

TEST_CASE("conv2d keeps constant images under normalized kernels") {
    const Tensor img = Tensor::image(1, 8, 8, 0.37);
    RandomStream s(5);
    Tensor kernel = draw_normal(s, {5, 5});
    for (double& v : kernel.values()) v = std::abs(v);
    kernel *= 1.0 / sum(kernel);
    const Tensor out = conv2d(img, kernel);
    for (double v : out.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("conv2d box kernel on one-hot 3x3 image") {
    Tensor img = Tensor::image(1, 3, 3);
    img.at(0, 1, 1) = 1.0;
    const Tensor box({3, 3}, 1.0 / 9.0);
    const Tensor out = conv2d(img, box);
    for (double v : out.values()) CHECK(v == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("conv2d rejects even kernels") {
    CHECK_THROWS(conv2d(Tensor::image(1, 4, 4), Tensor({2, 2}, 0.25)));
}

TEST_CASE("periodic correlation adjoint is correlation with the flipped kernel") {
    const RandomStream root(17);
    for (std::uint64_t k = 0; k < 5; ++k) {
        RandomStream s = root.substream("adj", k);
        const Tensor x = draw_normal(s, {2, 9, 11});
        const Tensor y = draw_normal(s, {2, 9, 11});
        const Tensor kernel = draw_normal(s, {5, 5});
        const double lhs = dot(conv2d(x, kernel, Boundary::periodic), y);
        const double rhs = dot(x, conv2d(y, flip_kernel(kernel), Boundary::periodic));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("reflect correlation has an exact dedicated adjoint") {
    RandomStream s(19);
    const Tensor x = draw_normal(s, {1, 8, 8});
    const Tensor y = draw_normal(s, {1, 8, 8});
    const Tensor kernel = draw_normal(s, {7, 7});
    const double lhs = dot(conv2d(x, kernel), y);
    const double rhs = dot(x, conv2d_adjoint(y, kernel));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("dft2 magnitude of a constant image is DC only") {
    const Tensor out = dft2_magnitude(Tensor::image(1, 4, 6, 0.5));
    CHECK(out[0] == doctest::Approx(4 * 6 * 0.5).epsilon(1e-14));
    for (std::size_t k = 1; k < out.size(); ++k) CHECK(std::abs(out[k]) < 1e-12);
}

TEST_CASE("dft2 magnitude is translation invariant and zero on zero input") {
    RandomStream s(23);
    const Tensor img = draw_normal(s, {1, 5, 6});
    Tensor shifted = Tensor::image(1, 5, 6);
    for (std::size_t y = 0; y < 5; ++y) {
        for (std::size_t x = 0; x < 6; ++x) shifted.at(0, (y + 2) % 5, (x + 3) % 6) = img.at(0, y, x);
    }
    const Tensor a = dft2_magnitude(img);
    const Tensor b = dft2_magnitude(shifted);
    CHECK(norm_inf(a - b) < 1e-12);
    CHECK(norm_inf(dft2_magnitude(Tensor::image(1, 3, 3))) == 0.0);
}

TEST_CASE("dft2 matches the direct double-sum definition") {
    RandomStream s(29);
    const std::size_t h = 4, w = 5;
    ComplexPlane plane(h * w);
    for (auto& z : plane) z = {s.normal(), s.normal()};
    const ComplexPlane fast = dft2(plane, h, w);
    for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
            std::complex<double> acc = 0.0;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double phase = -2.0 * std::numbers::pi * (double(u * y) / h + double(v * x) / w);
                    acc += plane[y * w + x] * std::polar(1.0, phase);
                }
            }
            CHECK(std::abs(fast[u * w + v] - acc) < 1e-12);
        }
    }
    // Adjoint identity <F a, b> = <a, F^H b>.
    ComplexPlane b(h * w);
    for (auto& z : b) z = {s.normal(), s.normal()};
    const ComplexPlane fb = dft2_adjoint(b, h, w);
    std::complex<double> lhs = 0.0, rhs = 0.0;
    for (std::size_t k = 0; k < h * w; ++k) {
        lhs += fast[k] * std::conj(b[k]);
        rhs += plane[k] * std::conj(fb[k]);
    }
    CHECK(std::abs(lhs - rhs) < 1e-10);
}

TEST_CASE("DPGT round trip is byte exact") {
    RandomStream s(31);
    const Tensor t = draw_normal(s, {3, 4, 2});
    const auto bytes = encode_dpgt(t);
    CHECK(bytes.size() == 4 + 4 + 3 * 4 + 24 * 8);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DPGT");
    const Tensor back = decode_dpgt(bytes);
    CHECK(back == t);
    CHECK(encode_dpgt(back) == bytes);
}

TEST_CASE("DPGT rejects corrupt input") {
    auto bytes = encode_dpgt(Tensor::vector({1, 2}));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_dpgt(bad_magic), FormatError);
    bytes.pop_back();
    CHECK_THROWS_AS(decode_dpgt(bytes), FormatError);
}

TEST_CASE("netpbm export clamps to 8 bits") {
    Tensor img = Tensor::image(1, 1, 3);
    img[0] = -0.5;
    img[1] = 0.5;
    img[2] = 2.0;
    const std::string pgm = encode_netpbm(img);
    CHECK(pgm.rfind("P5\n3 1\n255\n", 0) == 0);
    const std::string body = pgm.substr(pgm.size() - 3);
    CHECK(static_cast<unsigned char>(body[0]) == 0);
    CHECK(static_cast<unsigned char>(body[1]) == 128);
    CHECK(static_cast<unsigned char>(body[2]) == 255);
    CHECK(encode_netpbm(Tensor::image(3, 2, 2)).rfind("P6\n", 0) == 0);
    CHECK_THROWS(encode_netpbm(Tensor::vector({1, 2})));
}

TEST_CASE("dense convolution plan matches direct correlation") {
    RandomStream s(61);
    for (Boundary b : {Boundary::reflect, Boundary::periodic}) {
        Tensor kernel = draw_normal(s, {9, 9});
        const Conv2dPlan plan(5, 6, kernel, b);
        REQUIRE(plan.dense());
        const Tensor x = draw_normal(s, {2, 5, 6});
        CHECK(norm_inf(plan.apply(x) - conv2d(x, kernel, b)) < 1e-12);
        CHECK(norm_inf(plan.adjoint(x) - conv2d_adjoint(x, kernel, b)) < 1e-12);
        CHECK_FALSE(Conv2dPlan(8, 8, Tensor({3, 3}, 1.0), b).dense());
    }
}
