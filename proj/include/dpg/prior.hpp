// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dpg/schedule.hpp"
#include "dpg/tensor.hpp"

namespace dpg {

/// Raised when a closed form is undefined at the requested state, e.g. a
/// finite-atom prior queried at step 0 away from every atom.
class DegenerateStateError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Score model with the sign convention epsilon = -sigma * grad log p_i and
/// tweedie_mean = (x + (1 - alpha_bar) * score) / sqrt(alpha_bar) = E[x0 | x_i].
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual const Shape& shape() const = 0;

    virtual Tensor marginal_score(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const = 0;

    /// log p_i(x), including normalisation.
    virtual double log_marginal_density(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const = 0;

    virtual Tensor tweedie_mean(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const;

    /// v^T d(tweedie_mean)/dx. The base implementation uses central
    /// differences with h = 1e-4 * (1 + |x|_inf).
    virtual Tensor tweedie_vjp(const Tensor& x, std::size_t i, const NoiseSchedule& schedule, const Tensor& v) const;

    Tensor epsilon(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const;
};

/// Empirical prior: a weighted set of clean signals. Every noisy marginal is
/// an isotropic Gaussian mixture, so all quantities are closed form.
class FiniteAtomPrior final : public ScoreModel {
public:
    /// Weights must be positive; they are normalised to sum to one.
    FiniteAtomPrior(std::vector<Tensor> atoms, std::vector<double> weights);
    /// Equal weights.
    explicit FiniteAtomPrior(std::vector<Tensor> atoms);

    const Shape& shape() const override { return atoms_.front().shape(); }
    const std::vector<Tensor>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return atoms_.size(); }

    /// Posterior over atoms given x_i (softmax in log space).
    std::vector<double> responsibilities(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const;

    Tensor marginal_score(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const override;
    double log_marginal_density(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const override;
    Tensor tweedie_mean(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const override;
    Tensor tweedie_vjp(const Tensor& x, std::size_t i, const NoiseSchedule& schedule, const Tensor& v) const override;

    /// Same atoms, different weights.
    FiniteAtomPrior reweighted(std::vector<double> weights) const;

private:
    std::vector<double> log_joint(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const;
    Tensor weighted_atom_mean(const std::vector<double>& gamma) const;

    std::vector<Tensor> atoms_;
    std::vector<double> weights_;
};

/// Isotropic Gaussian prior N(mean, variance I).
class GaussianPrior final : public ScoreModel {
public:
    GaussianPrior(Tensor mean, double variance);

    const Shape& shape() const override { return mean_.shape(); }
    const Tensor& mean() const { return mean_; }
    double variance() const { return variance_; }

    /// Variance of x_i: alpha_bar * variance + 1 - alpha_bar.
    double marginal_variance(std::size_t i, const NoiseSchedule& schedule) const;
    /// Scalar Jacobian of the Tweedie mean: sqrt(alpha_bar) * variance / marginal_variance.
    double tweedie_gain(std::size_t i, const NoiseSchedule& schedule) const;
    /// Variance of x0 given x_i.
    double posterior_variance(std::size_t i, const NoiseSchedule& schedule) const;

    Tensor marginal_score(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const override;
    double log_marginal_density(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const override;
    Tensor tweedie_mean(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const override;
    Tensor tweedie_vjp(const Tensor& x, std::size_t i, const NoiseSchedule& schedule, const Tensor& v) const override;

private:
    Tensor mean_;
    double variance_;
};

/// v^T df/dx by central differences, one coordinate at a time.
Tensor finite_difference_vjp(const std::function<Tensor(const Tensor&)>& fn, const Tensor& x, const Tensor& v,
                             double h);

/// Gradient of a scalar function by central differences.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& fn, const Tensor& x, double h);

/// Loads every *.dpgt file in `dir` (sorted by file name) as an atom. Weights
/// come from `weights.txt` (one real per line) when present, else uniform.
FiniteAtomPrior load_atom_prior(const std::filesystem::path& dir);

}  // namespace dpg
