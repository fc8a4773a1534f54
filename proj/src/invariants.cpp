// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/invariants.hpp"

#include <algorithm>
#include <cmath>

#include "dpg/config.hpp"
#include "dpg/guidance.hpp"
#include "dpg/oracle.hpp"
#include "dpg/tensor_io.hpp"

namespace dpg {
namespace {

double relative_error(const Tensor& a, const Tensor& b) {
    return norm2(a - b) / std::max(norm2(b), 1e-300);
}

void add(std::vector<InvariantResult>& out, std::string group, std::string name, double value, double tol) {
    out.push_back({std::move(group), std::move(name), value, tol, value <= tol});
}

std::vector<Tensor> random_atoms(const RandomStream& s, std::size_t count, const Shape& shape) {
    std::vector<Tensor> atoms;
    for (std::size_t k = 0; k < count; ++k) {
        RandomStream a = s.substream("atom", k);
        atoms.push_back(draw_normal(a, shape));
    }
    return atoms;
}

void check_adjoints(std::vector<InvariantResult>& out, const RandomStream& root) {
    const Shape shape{1, 16, 16};
    for (OperatorKind kind : {OperatorKind::identity, OperatorKind::inpaint, OperatorKind::avgpool,
                              OperatorKind::gaussian_blur, OperatorKind::motion_blur}) {
        OperatorSpec spec;
        spec.kind = kind;
        spec.seed = 3;
        const OperatorPtr op = make_operator(spec, shape);
        RandomStream s = root.substream("adjoint", static_cast<std::uint64_t>(kind));
        const Tensor x = draw_normal(s, op->input_shape());
        const Tensor v = draw_normal(s, op->output_shape());
        const double lhs = dot(op->apply(x), v);
        const double rhs = dot(x, op->adjoint(v));
        add(out, "adjoint", to_string(kind), std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)), 1e-10);
    }
}

void check_tweedie(std::vector<InvariantResult>& out, const RandomStream& root, const NoiseSchedule& sched) {
    const FiniteAtomPrior atoms(random_atoms(root.substream("tweedie_atoms", 0), 6, {5}));
    const GaussianPrior gauss(Tensor({5}, 0.3), 2.0);
    double worst_atoms = 0.0, worst_gauss = 0.0;
    for (std::size_t i : {1, 100, 500, 900}) {
        RandomStream s = root.substream("tweedie_state", i);
        const Tensor x = draw_normal(s, {5});
        const double ab = sched.alpha_bar(i);
        for (const ScoreModel* m : {static_cast<const ScoreModel*>(&atoms), static_cast<const ScoreModel*>(&gauss)}) {
            Tensor from_score = x;
            from_score.axpy(1.0 - ab, m->marginal_score(x, i, sched));
            from_score *= 1.0 / std::sqrt(ab);
            const Tensor mu = m->tweedie_mean(x, i, sched);
            const double err = norm_inf(mu - from_score) / (1.0 + norm_inf(mu));
            double& worst = m == &atoms ? worst_atoms : worst_gauss;
            worst = std::max(worst, err);
        }
    }
    add(out, "tweedie", "finite_atom_mean_vs_score", worst_atoms, 1e-10);
    add(out, "tweedie", "gaussian_mean_vs_score", worst_gauss, 1e-10);
}

void check_vjps(std::vector<InvariantResult>& out, const RandomStream& root, const NoiseSchedule& sched) {
    constexpr double kTol = 1e-5;
    constexpr double kStep = 1e-5;
    {
        const FiniteAtomPrior atoms(random_atoms(root.substream("vjp_atoms", 0), 5, {4}));
        RandomStream s = root.substream("vjp_atoms_state", 0);
        const std::size_t i = 300;
        const Tensor x = diffuse_sample(atoms.atoms()[1], i, sched, s);
        const Tensor v = draw_normal(s, {4});
        const Tensor fd = finite_difference_vjp([&](const Tensor& z) { return atoms.tweedie_mean(z, i, sched); }, x,
                                                v, kStep);
        add(out, "vjp", "finite_atom_tweedie", relative_error(atoms.tweedie_vjp(x, i, sched, v), fd), kTol);
    }
    {
        const GaussianPrior gauss(Tensor({4}, -0.2), 0.7);
        RandomStream s = root.substream("vjp_gauss_state", 0);
        const std::size_t i = 300;
        const Tensor x = draw_normal(s, {4});
        const Tensor v = draw_normal(s, {4});
        const Tensor fd = finite_difference_vjp([&](const Tensor& z) { return gauss.tweedie_mean(z, i, sched); }, x,
                                                v, kStep);
        add(out, "vjp", "gaussian_tweedie", relative_error(gauss.tweedie_vjp(x, i, sched, v), fd), kTol);
    }
    for (OperatorKind kind : {OperatorKind::nonlinear_blur, OperatorKind::phase_retrieval}) {
        OperatorSpec spec;
        spec.kind = kind;
        const Shape shape{1, 8, 8};
        const OperatorPtr op = make_operator(spec, shape);
        RandomStream s = root.substream("vjp_op", static_cast<std::uint64_t>(kind));
        Tensor x = draw_normal(s, shape);
        x += Tensor(shape, 0.5);
        const Tensor v = draw_normal(s, op->output_shape());
        add(out, "vjp", to_string(kind), relative_error(op->vjp(x, v), operator_vjp_fd(*op, x, v)), kTol);
    }
}

void check_baselines(std::vector<InvariantResult>& out, const RandomStream& root) {
    RandomStream s = root.substream("baselines", 0);
    std::vector<double> losses(64);
    for (double& l : losses) l = std::abs(s.normal()) * 3.0;
    const auto costs = costs_from_losses(losses, 1.7);
    const auto base = loo_baselines(costs);
    double total = 0.0;
    for (std::size_t m = 0; m < costs.size(); ++m) total += costs[m] - base[m];
    add(out, "baseline", "loo_zero_sum", std::abs(total), 1e-12);
}

void check_schedule(std::vector<InvariantResult>& out, const NoiseSchedule& sched) {
    double violations = 0.0;
    for (std::size_t i = 1; i <= sched.n_steps(); ++i) {
        if (i > 1 && sched.beta(i) < sched.beta(i - 1)) violations += 1.0;
        if (!(sched.alpha_bar(i) < sched.alpha_bar(i - 1))) violations += 1.0;
        if (!(sched.sigma(i) > sched.sigma(i - 1))) violations += 1.0;
        if (!(sched.alpha_bar(i) > 0.0)) violations += 1.0;
    }
    add(out, "schedule", "monotone_betas_alpha_bar_sigma", violations, 0.0);
}

// Dense Gauss-Jordan inverse for the small matrices of the Gaussian check.
std::vector<double> invert(std::vector<double> a, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) inv[k * n + k] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        }
        for (std::size_t k = 0; k < n; ++k) {
            std::swap(a[c * n + k], a[piv * n + k]);
            std::swap(inv[c * n + k], inv[piv * n + k]);
        }
        const double d = a[c * n + c];
        for (std::size_t k = 0; k < n; ++k) {
            a[c * n + k] /= d;
            inv[c * n + k] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r * n + c];
            for (std::size_t k = 0; k < n; ++k) {
                a[r * n + k] -= f * a[c * n + k];
                inv[r * n + k] -= f * inv[c * n + k];
            }
        }
    }
    return inv;
}

// grad log p_i(x | y) for a Gaussian prior from dense Bayes algebra:
// x0 | y ~ N(m, C), C = (I / v + A^T A / s2)^-1, m = C (mean / v + A^T y / s2),
// x_i | y ~ N(sqrt(ab) m, ab C + (1 - ab) I).
Tensor dense_gaussian_conditional_score(const GaussianPrior& prior, const InverseProblem& problem, const Tensor& x,
                                        double ab) {
    const std::size_t n = x.size();
    const double v = prior.variance();
    const double s2 = problem.noise.sigma_y * problem.noise.sigma_y;
    std::vector<Tensor> cols;  // columns of A^T A
    for (std::size_t k = 0; k < n; ++k) {
        Tensor e(x.shape());
        e[k] = 1.0;
        cols.push_back(problem.op->adjoint(problem.op->apply(e)));
    }
    std::vector<double> prec(n * n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) prec[r * n + c] = cols[c][r] / s2 + (r == c ? 1.0 / v : 0.0);
    }
    const std::vector<double> cov = invert(prec, n);
    const Tensor aty = problem.op->adjoint(problem.y);
    std::vector<double> rhs(n), m(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) rhs[k] = prior.mean()[k] / v + aty[k] / s2;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) m[r] += cov[r * n + c] * rhs[c];
    }
    std::vector<double> marg(n * n);
    for (std::size_t k = 0; k < n * n; ++k) marg[k] = ab * cov[k] + ((k % (n + 1)) == 0 ? 1.0 - ab : 0.0);
    const std::vector<double> marg_inv = invert(marg, n);
    Tensor score(x.shape());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) score[r] -= marg_inv[r * n + c] * (x[c] - std::sqrt(ab) * m[c]);
    }
    return score;
}

void check_decomposition(std::vector<InvariantResult>& out, const RandomStream& root, const NoiseSchedule& sched) {
    const FiniteAtomPrior atoms(random_atoms(root.substream("decomp_atoms", 0), 8, {16}));
    OperatorSpec spec;
    spec.kind = OperatorKind::inpaint;
    spec.seed = 5;
    RandomStream s = root.substream("decomp_obs", 0);
    const InverseProblem problem =
        synthesize_observation(make_operator(spec, {16}), NoiseModel{}, atoms.atoms()[2], s);
    const GaussianPrior gauss(Tensor({16}, 0.1), 1.5);
    double worst_atoms = 0.0, worst_gauss = 0.0;
    for (std::size_t i : {50, 500, 950}) {
        RandomStream xs = root.substream("decomp_state", i);
        const Tensor x = draw_normal(xs, {16});
        for (const ScoreModel* m : {static_cast<const ScoreModel*>(&atoms), static_cast<const ScoreModel*>(&gauss)}) {
            const Tensor cond = exact_conditional_score(*m, problem, x, i, sched);
            Tensor rebuilt = m->marginal_score(x, i, sched);
            rebuilt.axpy(1.0 / sched.sigma(i), exact_guidance_score(*m, problem, x, i, sched));
            const double err = norm_inf(cond - rebuilt) / std::max(1.0, norm_inf(cond));
            double& worst = m == &atoms ? worst_atoms : worst_gauss;
            worst = std::max(worst, err);
        }
    }
    add(out, "decomposition", "finite_atom_conditional_identity", worst_atoms, 1e-12);
    add(out, "decomposition", "gaussian_conditional_identity", worst_gauss, 1e-12);

    double worst_dense = 0.0;
    for (std::size_t i : {50, 500, 950}) {
        RandomStream xs = root.substream("dense_state", i);
        const Tensor x = draw_normal(xs, {16});
        const Tensor ref = dense_gaussian_conditional_score(gauss, problem, x, sched.alpha_bar(i));
        worst_dense = std::max(worst_dense, relative_error(exact_conditional_score(gauss, problem, x, i, sched), ref));
    }
    add(out, "decomposition", "gaussian_conditional_vs_dense_bayes", worst_dense, 1e-9);
}

void check_oracle_fd(std::vector<InvariantResult>& out, const NoiseSchedule& sched) {
    // Two atoms in 1-D, identity operator: guidance against d/dx log p_i(y | x).
    const FiniteAtomPrior prior({Tensor::vector({-1.0}), Tensor::vector({1.0})});
    OperatorSpec spec;
    NoiseModel noise;
    noise.sigma_y = 0.5;
    const InverseProblem problem{make_operator(spec, {1}), noise, Tensor::vector({1.0}), {1}, 0};
    double worst = 0.0;
    for (std::size_t i : {100, 400, 800}) {
        for (double xv : {-0.7, 0.0, 0.4}) {
            const Tensor x = Tensor::vector({xv});
            const Tensor fd = finite_difference_gradient(
                [&](const Tensor& z) { return log_observation_likelihood(prior, problem, z, i, sched); }, x, 1e-5);
            const Tensor exact = scale(exact_guidance_score(prior, problem, x, i, sched), 1.0 / sched.sigma(i));
            worst = std::max(worst, relative_error(exact, fd));
        }
    }
    add(out, "oracle_fd", "two_atom_guidance_vs_fd", worst, 1e-6);
}

void check_roundtrips(std::vector<InvariantResult>& out, const RandomStream& root) {
    ExperimentConfig cfg;
    cfg.prior.source = PriorSource::atoms;
    cfg.prior.atoms = {{-1.0}, {1.0 / 3.0}};
    cfg.prior.weights = {0.3, 0.7};
    cfg.problem.y = std::vector<double>{0.1};
    cfg.problem.op.angle_deg = 12.5;
    cfg.guidance.forced_r = 0.1;
    cfg.guidance.guidance_norm = 0.123456789012345678;
    cfg.seeds = {1, 2, 3};
    cfg.sweep.guidance_norm = {0.1, 0.2};
    const std::string first = config_to_json(cfg).dump();
    const ExperimentConfig parsed = config_from_json(nlohmann::json::parse(first));
    const std::string second = config_to_json(parsed).dump();
    add(out, "roundtrip", "config", (parsed == cfg && first == second) ? 0.0 : 1.0, 0.0);

    RandomStream s = root.substream("roundtrip_tensor", 0);
    const Tensor t = draw_normal(s, {2, 3, 5});
    const auto bytes = encode_dpgt(t);
    const Tensor back = decode_dpgt(bytes);
    add(out, "roundtrip", "tensor_dpgt", (back == t && encode_dpgt(back) == bytes) ? 0.0 : 1.0, 0.0);
}

}  // namespace

std::vector<InvariantResult> run_invariant_suite(std::uint64_t seed) {
    const RandomStream root(seed);
    const NoiseSchedule sched = build_linear_schedule(ScheduleParams{});
    std::vector<InvariantResult> out;
    check_adjoints(out, root);
    check_tweedie(out, root, sched);
    check_vjps(out, root, sched);
    check_baselines(out, root);
    check_schedule(out, sched);
    check_decomposition(out, root, sched);
    check_oracle_fd(out, sched);
    check_roundtrips(out, root);
    return out;
}

nlohmann::json invariants_to_json(const std::vector<InvariantResult>& results) {
    nlohmann::json rows = nlohmann::json::array();
    bool all = true;
    for (const auto& r : results) {
        rows.push_back({{"group", r.group},
                        {"name", r.name},
                        {"value", r.value},
                        {"tolerance", r.tolerance},
                        {"pass", r.pass}});
        all = all && r.pass;
    }
    return {{"all_pass", all}, {"checks", rows}};
}

}  // namespace dpg
