// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "dpg/corpus.hpp"
#include "dpg/operators.hpp"
#include "dpg/prior.hpp"

using namespace dpg;

namespace {

OperatorPtr make(OperatorKind kind, const Shape& shape) {
    OperatorSpec spec;
    spec.kind = kind;
    spec.seed = 9;
    return make_operator(spec, shape);
}

double rel(const Tensor& a, const Tensor& b) { return norm2(a - b) / std::max(norm2(b), 1e-300); }

}  // namespace

TEST_CASE("avgpool averages blocks and its adjoint spreads by 1/f^2") {
    OperatorSpec spec;
    spec.kind = OperatorKind::avgpool;
    const OperatorPtr op = make_operator(spec, {1, 2, 2});
    const Tensor x({1, 2, 2}, std::vector<double>{1, 3, 5, 7});
    const Tensor y = op->apply(x);
    CHECK(y.shape() == Shape{1, 1, 1});
    CHECK(y[0] == 4.0);
    const Tensor back = op->adjoint(Tensor({1, 1, 1}, 8.0));
    CHECK(back == Tensor({1, 2, 2}, 2.0));
    CHECK_THROWS(make_operator(spec, {1, 3, 3}));
}

TEST_CASE("inpaint selects and scatters") {
    OperatorSpec spec;
    spec.kind = OperatorKind::inpaint;
    spec.keep = {0, 2};
    const OperatorPtr op = make_operator(spec, {3});
    CHECK(op->apply(Tensor::vector({9, 8, 7})) == Tensor::vector({9, 7}));
    CHECK(op->adjoint(Tensor::vector({1, 2})) == Tensor::vector({1, 0, 2}));
    spec.keep = {3};
    CHECK_THROWS(make_operator(spec, {3}));
}

TEST_CASE("random inpaint mask keeps half the coordinates") {
    const auto keep = random_keep_indices(256, 0.5, 4);
    CHECK(keep.size() == 128);
    CHECK(std::is_sorted(keep.begin(), keep.end()));
    CHECK(std::adjacent_find(keep.begin(), keep.end()) == keep.end());
    CHECK(keep == random_keep_indices(256, 0.5, 4));
    CHECK(keep != random_keep_indices(256, 0.5, 5));
}

TEST_CASE("gaussian blur with a delta kernel is the identity") {
    OperatorSpec spec;
    spec.kind = OperatorKind::gaussian_blur;
    spec.kernel_size = 1;
    RandomStream s(2);
    const Tensor x = draw_normal(s, {1, 5, 5});
    CHECK(make_operator(spec, {1, 5, 5})->apply(x) == x);
    spec.kernel_size = 7;
    spec.blur_std = 1e-3;
    CHECK(norm_inf(make_operator(spec, {1, 5, 5})->apply(x) - x) < 1e-15);
}

TEST_CASE("blur kernels are normalized") {
    CHECK(std::abs(sum(gaussian_kernel(7, 1.5)) - 1.0) < 1e-12);
    CHECK(std::abs(sum(gaussian_kernel(61, 3.0)) - 1.0) < 1e-12);
    for (double angle : {0.0, 17.0, 45.0, 90.0, 133.0}) {
        const Tensor k = motion_kernel(9, 9, angle);
        CHECK(std::abs(sum(k) - 1.0) < 1e-12);
        for (double v : k.values()) CHECK(v >= 0.0);
    }
    CHECK_THROWS(motion_kernel(7, 9, 0.0));
    CHECK_THROWS(gaussian_kernel(6, 1.0));
}

TEST_CASE("default motion blur builds with its 9-pixel line") {
    OperatorSpec spec;
    spec.kind = OperatorKind::motion_blur;
    const OperatorPtr op = make_operator(spec, {1, 16, 16});
    const Tensor x = Tensor::image(1, 16, 16, 0.4);
    CHECK(norm_inf(op->apply(x) - x) < 1e-14);
}

TEST_CASE("every linear operator passes 100 randomized adjoint tests") {
    const RandomStream root(101);
    for (OperatorKind kind : {OperatorKind::identity, OperatorKind::inpaint, OperatorKind::avgpool,
                              OperatorKind::gaussian_blur, OperatorKind::motion_blur}) {
        for (const Shape& shape : {Shape{1, 16, 16}, Shape{3, 8, 6}}) {
            const OperatorPtr op = make(kind, shape);
            REQUIRE(op->is_linear());
            double worst = 0.0;
            for (std::uint64_t t = 0; t < 100; ++t) {
                RandomStream s = root.substream(to_string(kind), t);
                const Tensor x = draw_normal(s, op->input_shape());
                const Tensor v = draw_normal(s, op->output_shape());
                const double lhs = dot(op->apply(x), v);
                const double rhs = dot(x, op->adjoint(v));
                worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
            }
            INFO(to_string(kind));
            CHECK(worst <= 1e-10);
        }
    }
}

TEST_CASE("operator VJP: linear ops use the adjoint, nonlinear ops match finite differences") {
    RandomStream s(55);
    const Shape shape{1, 8, 8};
    const OperatorPtr blur = make(OperatorKind::gaussian_blur, shape);
    const Tensor v = draw_normal(s, shape);
    CHECK(blur->vjp(draw_normal(s, shape), v) == blur->adjoint(v));
    CHECK(blur->vjp(draw_normal(s, shape), v) == blur->adjoint(v));
    CHECK(make(OperatorKind::identity, shape)->vjp(draw_normal(s, shape), v) == v);

    for (OperatorKind kind : {OperatorKind::nonlinear_blur, OperatorKind::phase_retrieval}) {
        const OperatorPtr op = make(kind, shape);
        CHECK_FALSE(op->is_linear());
        CHECK_THROWS_AS(op->adjoint(v), NotLinearError);
        for (int t = 0; t < 3; ++t) {
            Tensor x = draw_normal(s, shape);
            x += Tensor(shape, 0.5);
            const Tensor w = draw_normal(s, op->output_shape());
            INFO(to_string(kind));
            CHECK(rel(op->vjp(x, w), operator_vjp_fd(*op, x, w)) < 1e-5);
        }
    }
}

TEST_CASE("nonlinear blur is B + gain * B^2") {
    OperatorSpec spec;
    spec.kind = OperatorKind::nonlinear_blur;
    spec.kernel_size = 1;
    const OperatorPtr op = make_operator(spec, {1, 2, 2});
    const Tensor x({1, 2, 2}, std::vector<double>{1, -2, 0.5, 0});
    CHECK(op->apply(x) == Tensor({1, 2, 2}, std::vector<double>{1.5, 0.0, 0.625, 0.0}));
}

TEST_CASE("phase retrieval is translation invariant on toy images") {
    const OperatorPtr op = make(OperatorKind::phase_retrieval, {1, 16, 16});
    for (std::size_t k : {0, 5, 10}) {
        const Tensor img = toy_image(k);
        Tensor shifted = Tensor::image(1, 16, 16);
        for (std::size_t y = 0; y < 16; ++y) {
            for (std::size_t x = 0; x < 16; ++x) shifted.at(0, (y + 3) % 16, (x + 7) % 16) = img.at(0, y, x);
        }
        CHECK(norm_inf(op->apply(img) - op->apply(shifted)) < 1e-10);
    }
}

TEST_CASE("shape mismatch is rejected") {
    const OperatorPtr op = make(OperatorKind::avgpool, {1, 4, 4});
    CHECK_THROWS_AS(op->apply(Tensor::image(1, 2, 2)), ShapeError);
    CHECK_THROWS_AS(op->adjoint(Tensor::image(1, 4, 4)), ShapeError);
}

TEST_CASE("gaussian observation: default sigma and explicit noise") {
    CHECK(NoiseModel{}.sigma_y == 0.05);
    const OperatorPtr op = make(OperatorKind::identity, {4});
    const Tensor x0 = Tensor::vector({0.1, 0.2, -0.3, 1.0});
    RandomStream a(12), b(12);
    const InverseProblem p = synthesize_observation(op, NoiseModel{}, x0, a);
    const Tensor z = draw_normal(b, {4});
    CHECK(norm_inf(p.y - (x0 + scale(z, 0.05))) == 0.0);
    CHECK(p.x_shape == Shape{4});

    NoiseModel tiny;
    tiny.sigma_y = 1e-300;
    CHECK(norm_inf(synthesize_observation(op, tiny, x0, a).y - x0) == 0.0);
}

TEST_CASE("poisson observation is unbiased and counts clipped rates") {
    NoiseModel noise;
    noise.kind = NoiseKind::poisson;
    const std::size_t n = 100000;
    Tensor x0({3 * n});
    const double levels[3] = {0.05, 0.3, 0.9};
    for (std::size_t k = 0; k < 3 * n; ++k) x0[k] = levels[k % 3];
    RandomStream s(6);
    const InverseProblem p = synthesize_observation(make(OperatorKind::identity, x0.shape()), noise, x0, s);
    for (int g = 0; g < 3; ++g) {
        double mean = 0.0;
        for (std::size_t k = g; k < 3 * n; k += 3) mean += p.y[k];
        mean /= n;
        CHECK(std::abs(mean / levels[g] - 1.0) < 0.01);
    }
    CHECK(p.clipped_count == 0);
    const InverseProblem clipped =
        synthesize_observation(make(OperatorKind::identity, {3}), noise, Tensor::vector({-0.2, 0.5, -1.0}), s);
    CHECK(clipped.clipped_count == 2);
    CHECK(clipped.y[0] == 0.0);
    CHECK(clipped.y[2] == 0.0);
}

TEST_CASE("noise model validation") {
    NoiseModel bad;
    bad.sigma_y = 0.0;
    CHECK_THROWS(validate(bad));
    NoiseModel pois;
    pois.kind = NoiseKind::poisson;
    pois.lambda = -1.0;
    CHECK_THROWS(validate(pois));
}

TEST_CASE("reconstruction losses") {
    NoiseModel g;
    NoiseModel p;
    p.kind = NoiseKind::poisson;
    const Tensor y = Tensor::vector({1.0, 2.0});
    CHECK(recon_loss(g, y, y) == 0.0);
    CHECK(recon_loss(p, y, y) == 0.0);
    CHECK(recon_loss(g, Tensor::vector({3, 4}), Tensor::vector({0, 0})) == 25.0);
    CHECK(recon_loss(p, Tensor::vector({3, -4}), Tensor::vector({0, 0})) == 7.0);
    CHECK_THROWS(recon_loss(g, y, Tensor::vector({1.0})));

    RandomStream s(3);
    for (int t = 0; t < 20; ++t) {
        const Tensor a = draw_normal(s, {5});
        const Tensor b = draw_normal(s, {5});
        CHECK(recon_loss(g, a, b) > 0.0);
        CHECK(recon_loss(p, a, b) > 0.0);
    }
}

TEST_CASE("gaussian loss gradient matches finite differences") {
    NoiseModel g;
    RandomStream s(8);
    const Tensor y = draw_normal(s, {6});
    const Tensor ax = draw_normal(s, {6});
    const Tensor fd = finite_difference_gradient([&](const Tensor& z) { return recon_loss(g, y, z); }, ax, 1e-6);
    CHECK(rel(recon_loss_gradient(g, y, ax), fd) < 1e-8);
}
