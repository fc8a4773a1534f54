// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "dpg/guidance.hpp"
#include "dpg/oracle.hpp"

using namespace dpg;

namespace {

const NoiseSchedule kSched = build_linear_schedule(ScheduleParams{});

InverseProblem identity_problem(const Tensor& y, double sigma_y, NoiseKind kind = NoiseKind::gaussian) {
    OperatorSpec spec;
    NoiseModel noise;
    noise.kind = kind;
    noise.sigma_y = sigma_y;
    return InverseProblem{make_operator(spec, y.shape()), noise, y, y.shape(), 0};
}

double rel(const Tensor& a, const Tensor& b) { return norm2(a - b) / std::max(norm2(b), 1e-300); }

}  // namespace

TEST_CASE("residual std") {
    const InverseProblem p = identity_problem(Tensor({5}, 1.1), 0.05);
    CHECK(residual_std(p, Tensor({5}, 1.0), 1e-4) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(residual_std(p, Tensor({5}, 1.1), 1e-4) == 1e-4);
    const InverseProblem q = identity_problem(Tensor::vector({3, 4}), 0.05);
    CHECK(residual_std(q, Tensor({2}, 0.0), 1e-4) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));

    // The denominator is the element count of x, not of y.
    OperatorSpec spec;
    spec.kind = OperatorKind::inpaint;
    spec.keep = {0};
    const InverseProblem masked{make_operator(spec, {4}), NoiseModel{}, Tensor::vector({2.0}), {4}, 0};
    CHECK(residual_std(masked, Tensor({4}, 0.0), 1e-4) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("adaptive Z") {
    const Tensor zero({2}, 0.0);
    const InverseProblem pois = identity_problem(Tensor::vector({3, -4}), 0.05, NoiseKind::poisson);
    CHECK(adaptive_z(pois, zero, ZMode::sum, 1e-4) == 7.0);
    const InverseProblem gauss = identity_problem(Tensor::vector({3, 4}), 0.05);
    CHECK(adaptive_z(gauss, zero, ZMode::sum, 1e-4) == 25.0);
    CHECK(adaptive_z(gauss, zero, ZMode::per_pixel, 1e-4) == doctest::Approx(12.5).epsilon(1e-15));
    CHECK(adaptive_z(gauss, Tensor::vector({3, 4}), ZMode::sum, 1e-4) == doctest::Approx(1e-8));
    CHECK(adaptive_z(pois, zero, ZMode::per_pixel, 1e-4) == 3.5);
}

TEST_CASE("costs from losses") {
    const auto c = costs_from_losses({10, 12, 10}, 10);
    CHECK(c[0] == 1.0);
    CHECK(c[1] == doctest::Approx(std::exp(-0.2)).epsilon(1e-15));
    CHECK(c[1] == doctest::Approx(0.8187).epsilon(1e-4));
    CHECK(c[2] == 1.0);
    CHECK(costs_from_losses({4, 4, 4}, 0.1) == std::vector<double>{1, 1, 1});
    for (double v : costs_from_losses({0, 5, 50}, 1e12)) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
    for (double v : costs_from_losses({0, 1e6, 3}, 1e-3)) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS(costs_from_losses({1, 2}, 0.0));
}

TEST_CASE("conditional weights evaluate the loss through the operator") {
    const InverseProblem p = identity_problem(Tensor::vector({0, 0}), 0.05);
    const auto c = conditional_weights(p, {Tensor::vector({1, 0}), Tensor::vector({0, 0}), Tensor::vector({2, 0})}, 2.0);
    CHECK(c[1] == 1.0);
    CHECK(c[0] == doctest::Approx(std::exp(-0.5)));
    CHECK(c[2] == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("leave-one-out baselines") {
    const auto b = loo_baselines({1, 2, 3});
    CHECK(b == std::vector<double>{2.5, 2.0, 1.5});
    for (double v : loo_baselines({0.4, 0.4, 0.4, 0.4})) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));
    CHECK_THROWS(loo_baselines({1.0}));
    RandomStream s(3);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> c(2 + t);
        for (double& v : c) v = s.uniform();
        const auto base = loo_baselines(c);
        double total = 0.0;
        for (std::size_t m = 0; m < c.size(); ++m) total += c[m] - base[m];
        CHECK(std::abs(total) <= 1e-12);
    }
}

TEST_CASE("rescale and combine") {
    GuidanceConfig cfg;
    cfg.guidance_norm = 10.0;
    const Tensor zero({2}, 0.0);
    const Tensor s = Tensor::vector({3, 4});
    CHECK(norm_inf(rescale_and_combine(zero, s, cfg) - Tensor::vector({6, 8})) < 1e-14);
    cfg.rescale = RescaleConvention::literal_sq_norm;
    CHECK(norm_inf(rescale_and_combine(zero, s, cfg) - Tensor::vector({1.2, 1.6})) < 1e-14);
    const Tensor base = Tensor::vector({0.3, -0.1});
    CHECK(rescale_and_combine(base, zero, cfg) == base);
    cfg.rescale = RescaleConvention::unit_norm;
    CHECK(norm2(rescale_and_combine(base, s, cfg) - base) == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("config validation") {
    GuidanceConfig cfg;
    cfg.n_mc = 1;
    CHECK_THROWS(validate(cfg));
    cfg.estimator = EstimatorKind::dps;
    CHECK_NOTHROW(validate(cfg));
    cfg.r_floor = 0.0;
    CHECK_THROWS(validate(cfg));
}

TEST_CASE("DPG on a single atom is exactly zero") {
    const FiniteAtomPrior prior({Tensor::vector({0.3, -0.2, 0.9})});
    const InverseProblem p = identity_problem(Tensor::vector({1, 1, 1}), 0.05);
    GuidanceConfig cfg;
    cfg.n_mc = 64;
    const auto res = dpg_score(prior, p, Tensor::vector({0.1, 0.2, 0.3}), 400, kSched, cfg, RandomStream(1));
    CHECK(norm_inf(res.s_tilde) == 0.0);
    CHECK(norm_inf(exact_guidance_score(prior, p, Tensor::vector({0.1, 0.2, 0.3}), 400, kSched)) == 0.0);
}

TEST_CASE("DPG with flat costs is exactly zero") {
    // With y far away every sample has the same rounded loss, so all costs are one.
    const GaussianPrior prior(Tensor({3}, 0.0), 1.0);
    const InverseProblem flat = identity_problem(Tensor({3}, 1e100), 0.05);
    GuidanceConfig cfg;
    cfg.n_mc = 32;
    cfg.forced_r = 0.1;
    const auto res = dpg_score(prior, flat, Tensor({3}, 0.1), 500, kSched, cfg, RandomStream(2));
    for (double c : res.state.costs) CHECK(c == 1.0);
    CHECK(norm_inf(res.s_tilde) == 0.0);
}

TEST_CASE("DPG state invariants and the sample-stream contract") {
    RandomStream s(5);
    std::vector<Tensor> atoms;
    for (int k = 0; k < 6; ++k) atoms.push_back(draw_normal(s, {5}));
    const FiniteAtomPrior prior(atoms);
    const InverseProblem p = identity_problem(atoms[2], 0.05);
    GuidanceConfig cfg;
    cfg.n_mc = 40;
    const std::size_t i = 350;
    const Tensor x = diffuse_sample(atoms[2], i, kSched, s);
    const RandomStream root(77);
    const auto res = dpg_score(prior, p, x, i, kSched, cfg, root);
    const auto& st = res.state;
    CHECK(st.r >= cfg.r_floor);
    CHECK(st.z > 0.0);
    double centered = 0.0;
    for (std::size_t m = 0; m < cfg.n_mc; ++m) {
        CHECK(st.costs[m] > 0.0);
        CHECK(st.costs[m] <= 1.0);
        centered += st.costs[m] - st.baselines[m];
    }
    CHECK(std::abs(centered) <= 1e-12);

    // Rebuild s~ from the documented substreams, once as printed (per-sample
    // gradients of |x0 - mu|^2) and once with all costs scaled by 3.7.
    std::vector<Tensor> xi;
    for (std::size_t m = 0; m < cfg.n_mc; ++m) {
        RandomStream ms = root.substream("dpg", i).substream("mc", m);
        xi.push_back(draw_normal(ms, {5}));
        Tensor sample = st.mu;
        sample.axpy(st.r, xi.back());
        CHECK(recon_loss(p.noise, p.y, sample) == doctest::Approx(st.losses[m]).epsilon(1e-14));
    }
    Tensor per_sample({5});
    for (std::size_t m = 0; m < cfg.n_mc; ++m) {
        // grad_x |x0 - mu(x)|^2 = -2 J^T (x0 - mu) = -2 r J^T xi
        const Tensor grad = scale(prior.tweedie_vjp(x, i, kSched, xi[m]), -2.0 * st.r);
        per_sample.axpy(-(st.costs[m] - st.baselines[m]) / (2.0 * st.r * st.r * cfg.n_mc), grad);
    }
    CHECK(rel(res.s_tilde, per_sample) < 1e-12);

    std::vector<double> scaled = st.costs;
    for (double& c : scaled) c *= 3.7;
    const auto b2 = loo_baselines(scaled);
    Tensor w({5});
    for (std::size_t m = 0; m < cfg.n_mc; ++m) w.axpy(scaled[m] - b2[m], xi[m]);
    const Tensor s2 = scale(prior.tweedie_vjp(x, i, kSched, w), 1.0 / (st.r * cfg.n_mc));
    const Tensor eps = prior.epsilon(x, i, kSched);
    CHECK(norm_inf(rescale_and_combine(eps, s2, cfg) - rescale_and_combine(eps, res.s_tilde, cfg)) <= 1e-12);

    // Bit-identical on rerun.
    CHECK(dpg_score(prior, p, x, i, kSched, cfg, root).s_tilde == res.s_tilde);
}

TEST_CASE("DPG agrees with the exact guidance for a Gaussian prior") {
    const GaussianPrior prior(Tensor({4}, 0.0), 1.0);
    RandomStream s(9);
    const Tensor x0 = draw_normal(s, {4});
    const InverseProblem clean = identity_problem(x0, 0.5);
    RandomStream obs(10);
    const InverseProblem p = synthesize_observation(clean.op, clean.noise, x0, obs);
    GuidanceConfig cfg;
    cfg.n_mc = 100000;
    for (std::size_t i : {100, 500, 900}) {
        const Tensor x = diffuse_sample(x0, i, kSched, s);
        const Tensor exact = exact_guidance_score(prior, p, x, i, kSched);
        const Tensor est = dpg_score(prior, p, x, i, kSched, cfg, RandomStream(i)).s_tilde;
        INFO("i = " << i);
        CHECK(direction_accuracy(est, exact) >= 0.95);
    }
}

TEST_CASE("DPS closed form and finite differences") {
    const GaussianPrior g(Tensor({3}, 0.0), 1.0);
    const Tensor y = Tensor::vector({0.5, -1.0, 2.0});
    const InverseProblem p = identity_problem(y, 0.05);
    const Tensor x = Tensor::vector({0.2, 0.4, -0.6});
    const std::size_t i = 250;
    const double sab = std::sqrt(kSched.alpha_bar(i));
    const Tensor expected = scale(y - scale(x, sab), 2.0 * sab);
    CHECK(rel(dps_score(g, p, x, i, kSched), expected) < 1e-14);

    const InverseProblem at_min = identity_problem(g.tweedie_mean(x, i, kSched), 0.05);
    CHECK(norm_inf(dps_score(g, at_min, x, i, kSched)) == 0.0);

    const FiniteAtomPrior two({Tensor::vector({-1.0}), Tensor::vector({1.0})});
    const InverseProblem q = identity_problem(Tensor::vector({0.4}), 0.5);
    for (std::size_t step : {100, 500, 900}) {
        for (double xv : {-0.5, 0.2, 1.1}) {
            const Tensor xs = Tensor::vector({xv});
            const Tensor fd = finite_difference_gradient(
                [&](const Tensor& z) { return recon_loss(q.noise, q.y, q.op->apply(two.tweedie_mean(z, step, kSched))); },
                xs, 1e-6);
            // Absolute floor: saturated states have gradients below FD resolution.
            INFO("step " << step << " x " << xv << " fd " << fd[0]);
            CHECK(norm2(dps_score(two, q, xs, step, kSched) + fd) <= 1e-5 * std::max(norm2(fd), 1e-3));
        }
    }
}

TEST_CASE("DPS with Poisson noise uses the sign subgradient") {
    const GaussianPrior g(Tensor({2}, 0.0), 1.0);
    const InverseProblem p = identity_problem(Tensor::vector({1.0, -1.0}), 0.05, NoiseKind::poisson);
    const std::size_t i = 100;
    const double sab = std::sqrt(kSched.alpha_bar(i));
    const Tensor got = dps_score(g, p, Tensor({2}, 0.0), i, kSched);
    CHECK(norm_inf(got - Tensor::vector({sab, -sab})) < 1e-15);
}

TEST_CASE("DPG direction improves with more samples on finite-atom problems") {
    RandomStream s(41);
    std::vector<Tensor> atoms;
    for (int k = 0; k < 8; ++k) atoms.push_back(draw_normal(s, {16}));
    const FiniteAtomPrior prior(atoms);
    OperatorSpec spec;
    spec.kind = OperatorKind::inpaint;
    spec.keep_fraction = 0.5;
    spec.seed = 2;
    const OperatorPtr op = make_operator(spec, {16});
    double cos_by_n[3] = {0, 0, 0};
    const std::size_t sizes[3] = {100, 1000, 10000};
    for (int st = 0; st < 20; ++st) {
        RandomStream ds = RandomStream(500).substream("state", st);
        const Tensor& x0 = atoms[st % 8];
        NoiseModel noise;
        const InverseProblem p = synthesize_observation(op, noise, x0, ds);
        const std::size_t i = 300 + 30 * st;
        const Tensor x = diffuse_sample(x0, i, kSched, ds);
        const Tensor exact = exact_guidance_score(prior, p, x, i, kSched);
        for (int k = 0; k < 3; ++k) {
            GuidanceConfig cfg;
            cfg.n_mc = sizes[k];
            cos_by_n[k] += direction_accuracy(dpg_score(prior, p, x, i, kSched, cfg, RandomStream(st)).s_tilde, exact) / 20;
        }
    }
    INFO(cos_by_n[0] << " " << cos_by_n[1] << " " << cos_by_n[2]);
    CHECK(cos_by_n[0] < cos_by_n[1]);
    CHECK(cos_by_n[1] < cos_by_n[2]);
}
