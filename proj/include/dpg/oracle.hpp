// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dpg/operators.hpp"
#include "dpg/prior.hpp"
#include "dpg/schedule.hpp"

namespace dpg {

// Closed-form ground truth for linear operators with Gaussian noise. For a
// finite-atom prior the posterior p(x0 | y) is the same atom set with
// reweighted masses, so every conditional quantity is again a mixture.

class UnsupportedOracleError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PosteriorAtoms {
    FiniteAtomPrior posterior;  // same atoms, posterior weights

    const std::vector<double>& weights() const { return posterior.weights(); }
    const std::vector<Tensor>& atoms() const { return posterior.atoms(); }
};

/// Throws UnsupportedOracleError unless the operator is linear and the noise Gaussian.
void require_oracle_compatible(const InverseProblem& problem);

PosteriorAtoms exact_posterior_atoms(const FiniteAtomPrior& prior, const InverseProblem& problem);

/// grad_x log p_i(x | y).
Tensor exact_conditional_score(const FiniteAtomPrior& prior, const InverseProblem& problem, const Tensor& x,
                               std::size_t i, const NoiseSchedule& schedule);
Tensor exact_conditional_score(const GaussianPrior& prior, const InverseProblem& problem, const Tensor& x,
                               std::size_t i, const NoiseSchedule& schedule);

/// sigma_i * grad_x log p_i(y | x).
Tensor exact_guidance_score(const FiniteAtomPrior& prior, const InverseProblem& problem, const Tensor& x,
                            std::size_t i, const NoiseSchedule& schedule);
Tensor exact_guidance_score(const GaussianPrior& prior, const InverseProblem& problem, const Tensor& x,
                            std::size_t i, const NoiseSchedule& schedule);

/// Dispatches on the concrete prior; throws UnsupportedOracleError for other models.
Tensor exact_guidance_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x, std::size_t i,
                            const NoiseSchedule& schedule);
Tensor exact_conditional_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x,
                               std::size_t i, const NoiseSchedule& schedule);
bool has_exact_oracle(const ScoreModel& model, const InverseProblem& problem);

/// log p_i(y | x) up to an additive constant independent of x. Used as the
/// finite-difference reference for the guidance score.
double log_observation_likelihood(const FiniteAtomPrior& prior, const InverseProblem& problem, const Tensor& x,
                                  std::size_t i, const NoiseSchedule& schedule);
double log_observation_likelihood(const GaussianPrior& prior, const InverseProblem& problem, const Tensor& x,
                                  std::size_t i, const NoiseSchedule& schedule);

/// Cosine similarity; 1 when both vectors are zero, 0 when exactly one is.
double direction_accuracy(const Tensor& estimate, const Tensor& exact);

/// Nearest-atom histogram of `samples` (ties to the lowest index) compared to
/// the posterior weights: 0.5 * sum_k |freq_k - w_k|.
double posterior_tv_distance(const std::vector<Tensor>& samples, const PosteriorAtoms& exact);

/// Index of the atom closest to x in Euclidean distance (lowest index on ties).
std::size_t nearest_atom(const std::vector<Tensor>& atoms, const Tensor& x);

}  // namespace dpg
