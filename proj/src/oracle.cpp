// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpg {
namespace {

// Solves (tau2 * A A^T + s2 * I) u = rhs by conjugate gradients.
Tensor solve_observation_covariance(const DegradationOperator& op, double tau2, double s2, const Tensor& rhs) {
    auto apply_cov = [&](const Tensor& u) {
        Tensor out = scale(op.apply(op.adjoint(u)), tau2);
        out.axpy(s2, u);
        return out;
    };
    Tensor u(rhs.shape());
    Tensor r = rhs;
    Tensor p = r;
    double rr = norm2_squared(r);
    const double target = 1e-28 * std::max(rr, 1e-300);
    for (std::size_t it = 0; it < 10 * rhs.size() + 10 && rr > target; ++it) {
        const Tensor ap = apply_cov(p);
        const double alpha = rr / dot(p, ap);
        u.axpy(alpha, p);
        r.axpy(-alpha, ap);
        const double rr_next = norm2_squared(r);
        p *= rr_next / rr;
        p += r;
        rr = rr_next;
    }
    return u;
}

}  // namespace

void require_oracle_compatible(const InverseProblem& problem) {
    if (!problem.op->is_linear()) {
        throw UnsupportedOracleError("exact oracle needs a linear operator, got " + to_string(problem.op->kind()));
    }
    if (problem.noise.kind != NoiseKind::gaussian) {
        throw UnsupportedOracleError("exact oracle needs Gaussian observation noise");
    }
}

PosteriorAtoms exact_posterior_atoms(const FiniteAtomPrior& prior, const InverseProblem& problem) {
    require_oracle_compatible(problem);
    const double s2 = problem.noise.sigma_y * problem.noise.sigma_y;
    std::vector<double> logits(prior.size());
    for (std::size_t k = 0; k < prior.size(); ++k) {
        const Tensor r = problem.y - problem.op->apply(prior.atoms()[k]);
        logits[k] = std::log(prior.weights()[k]) - norm2_squared(r) / (2.0 * s2);
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(logits[k] - m);
    // Atoms with vanishing posterior mass keep the smallest positive weight so
    // the reweighted prior stays a valid mixture; the shift is below 1e-300.
    for (double& v : w) v = std::max(v, std::numeric_limits<double>::min());
    return PosteriorAtoms{prior.reweighted(std::move(w))};
}

Tensor exact_conditional_score(const FiniteAtomPrior& prior, const InverseProblem& problem, const Tensor& x,
                               std::size_t i, const NoiseSchedule& schedule) {
    return exact_posterior_atoms(prior, problem).posterior.marginal_score(x, i, schedule);
}

Tensor exact_guidance_score(const FiniteAtomPrior& prior, const InverseProblem& problem, const Tensor& x,
                            std::size_t i, const NoiseSchedule& schedule) {
    const PosteriorAtoms post = exact_posterior_atoms(prior, problem);
    if (i == 0) throw DegenerateStateError("guidance score is undefined at step 0");
    const double ab = schedule.alpha_bar(i);
    // sigma * (score_post - score_prior) = sigma * sqrt(ab)/(1-ab) * (mu_post - mu_prior)
    Tensor diff = post.posterior.tweedie_mean(x, i, schedule) - prior.tweedie_mean(x, i, schedule);
    diff *= schedule.sigma(i) * std::sqrt(ab) / (1.0 - ab);
    return diff;
}

Tensor exact_guidance_score(const GaussianPrior& prior, const InverseProblem& problem, const Tensor& x,
                            std::size_t i, const NoiseSchedule& schedule) {
    require_oracle_compatible(problem);
    const Tensor mu = prior.tweedie_mean(x, i, schedule);
    const Tensor e = problem.y - problem.op->apply(mu);
    const double tau2 = prior.posterior_variance(i, schedule);
    const double s2 = problem.noise.sigma_y * problem.noise.sigma_y;
    const Tensor u = solve_observation_covariance(*problem.op, tau2, s2, e);
    return scale(problem.op->adjoint(u), schedule.sigma(i) * prior.tweedie_gain(i, schedule));
}

Tensor exact_conditional_score(const GaussianPrior& prior, const InverseProblem& problem, const Tensor& x,
                               std::size_t i, const NoiseSchedule& schedule) {
    Tensor score = prior.marginal_score(x, i, schedule);
    score.axpy(1.0 / schedule.sigma(i), exact_guidance_score(prior, problem, x, i, schedule));
    return score;
}

Tensor exact_guidance_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x, std::size_t i,
                            const NoiseSchedule& schedule) {
    if (const auto* atoms = dynamic_cast<const FiniteAtomPrior*>(&model)) {
        return exact_guidance_score(*atoms, problem, x, i, schedule);
    }
    if (const auto* gauss = dynamic_cast<const GaussianPrior*>(&model)) {
        return exact_guidance_score(*gauss, problem, x, i, schedule);
    }
    throw UnsupportedOracleError("no exact oracle for this score model");
}

Tensor exact_conditional_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x,
                               std::size_t i, const NoiseSchedule& schedule) {
    if (const auto* atoms = dynamic_cast<const FiniteAtomPrior*>(&model)) {
        return exact_conditional_score(*atoms, problem, x, i, schedule);
    }
    if (const auto* gauss = dynamic_cast<const GaussianPrior*>(&model)) {
        return exact_conditional_score(*gauss, problem, x, i, schedule);
    }
    throw UnsupportedOracleError("no exact oracle for this score model");
}

bool has_exact_oracle(const ScoreModel& model, const InverseProblem& problem) {
    const bool known = dynamic_cast<const FiniteAtomPrior*>(&model) || dynamic_cast<const GaussianPrior*>(&model);
    return known && problem.op->is_linear() && problem.noise.kind == NoiseKind::gaussian;
}

double log_observation_likelihood(const FiniteAtomPrior& prior, const InverseProblem& problem, const Tensor& x,
                                  std::size_t i, const NoiseSchedule& schedule) {
    const PosteriorAtoms post = exact_posterior_atoms(prior, problem);
    return post.posterior.log_marginal_density(x, i, schedule) - prior.log_marginal_density(x, i, schedule);
}

double log_observation_likelihood(const GaussianPrior& prior, const InverseProblem& problem, const Tensor& x,
                                  std::size_t i, const NoiseSchedule& schedule) {
    require_oracle_compatible(problem);
    const Tensor e = problem.y - problem.op->apply(prior.tweedie_mean(x, i, schedule));
    const double s2 = problem.noise.sigma_y * problem.noise.sigma_y;
    const Tensor u = solve_observation_covariance(*problem.op, prior.posterior_variance(i, schedule), s2, e);
    return -0.5 * dot(e, u);
}

double direction_accuracy(const Tensor& estimate, const Tensor& exact) {
    require_same_shape(estimate, exact, "direction_accuracy");
    const double na = norm2(estimate);
    const double nb = norm2(exact);
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(estimate, exact) / (na * nb), -1.0, 1.0);
}

std::size_t nearest_atom(const std::vector<Tensor>& atoms, const Tensor& x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        const double d = norm2_squared(x - atoms[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

double posterior_tv_distance(const std::vector<Tensor>& samples, const PosteriorAtoms& exact) {
    if (samples.empty()) throw std::invalid_argument("posterior_tv_distance needs at least one sample");
    std::vector<double> freq(exact.atoms().size(), 0.0);
    for (const auto& s : samples) freq[nearest_atom(exact.atoms(), s)] += 1.0;
    double tv = 0.0;
    for (std::size_t k = 0; k < freq.size(); ++k) {
        tv += std::abs(freq[k] / static_cast<double>(samples.size()) - exact.weights()[k]);
    }
    return 0.5 * tv;
}

}  // namespace dpg
