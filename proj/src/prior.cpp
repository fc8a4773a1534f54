// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "dpg/tensor_io.hpp"

namespace dpg {
namespace {

double log_sum_exp(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double acc = 0.0;
    for (double l : logits) acc += std::exp(l - m);
    return m + std::log(acc);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - m);
        total += out[k];
    }
    for (double& v : out) v /= total;
    return out;
}

void require_positive_step(std::size_t i, const char* what) {
    if (i == 0) throw DegenerateStateError(std::string(what) + " is undefined at step 0 for a finite-atom prior");
}

}  // namespace

// ---------------------------------------------------------------------------
// ScoreModel

Tensor ScoreModel::tweedie_mean(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    const double ab = schedule.alpha_bar(i);
    Tensor out = x;
    out.axpy(1.0 - ab, marginal_score(x, i, schedule));
    out *= 1.0 / std::sqrt(ab);
    return out;
}

Tensor ScoreModel::tweedie_vjp(const Tensor& x, std::size_t i, const NoiseSchedule& schedule, const Tensor& v) const {
    const double h = 1e-4 * (1.0 + norm_inf(x));
    return finite_difference_vjp([&](const Tensor& p) { return tweedie_mean(p, i, schedule); }, x, v, h);
}

Tensor ScoreModel::epsilon(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    return scale(marginal_score(x, i, schedule), -schedule.sigma(i));
}

// ---------------------------------------------------------------------------
// FiniteAtomPrior

FiniteAtomPrior::FiniteAtomPrior(std::vector<Tensor> atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.empty()) throw std::invalid_argument("finite-atom prior needs at least one atom");
    if (weights_.size() != atoms_.size()) throw std::invalid_argument("one weight per atom required");
    for (const auto& a : atoms_) require_same_shape(atoms_.front(), a, "finite-atom prior");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("atom weights must be positive and finite");
        total += w;
    }
    for (double& w : weights_) w /= total;
}

FiniteAtomPrior::FiniteAtomPrior(std::vector<Tensor> atoms)
    : FiniteAtomPrior(atoms, std::vector<double>(atoms.size(), 1.0)) {}

std::vector<double> FiniteAtomPrior::log_joint(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    require_same_shape(atoms_.front(), x, "responsibilities");
    const double ab = schedule.alpha_bar(i);
    const double root = std::sqrt(ab);
    const double var = 1.0 - ab;
    std::vector<double> logits(atoms_.size());
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        double dist2 = 0.0;
        const Tensor& a = atoms_[k];
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double d = x[j] - root * a[j];
            dist2 += d * d;
        }
        logits[k] = std::log(weights_[k]) - dist2 / (2.0 * var);
    }
    return logits;
}

std::vector<double> FiniteAtomPrior::responsibilities(const Tensor& x, std::size_t i,
                                                      const NoiseSchedule& schedule) const {
    if (i == 0) {
        require_same_shape(atoms_.front(), x, "responsibilities");
        std::vector<double> gamma(atoms_.size(), 0.0);
        double total = 0.0;
        for (std::size_t k = 0; k < atoms_.size(); ++k) {
            if (atoms_[k] == x) {
                gamma[k] = weights_[k];
                total += weights_[k];
            }
        }
        if (total == 0.0) throw DegenerateStateError("responsibilities at step 0: state is not an atom");
        for (double& g : gamma) g /= total;
        return gamma;
    }
    return softmax(log_joint(x, i, schedule));
}

Tensor FiniteAtomPrior::weighted_atom_mean(const std::vector<double>& gamma) const {
    Tensor mean(shape());
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        if (gamma[k] != 0.0) mean.axpy(gamma[k], atoms_[k]);
    }
    return mean;
}

Tensor FiniteAtomPrior::marginal_score(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    require_positive_step(i, "marginal score");
    const double ab = schedule.alpha_bar(i);
    Tensor score = scale(tweedie_mean(x, i, schedule), std::sqrt(ab));
    score -= x;
    score *= 1.0 / (1.0 - ab);
    return score;
}

double FiniteAtomPrior::log_marginal_density(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    require_positive_step(i, "marginal density");
    const double var = 1.0 - schedule.alpha_bar(i);
    return log_sum_exp(log_joint(x, i, schedule)) -
           0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var);
}

Tensor FiniteAtomPrior::tweedie_mean(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    return weighted_atom_mean(responsibilities(x, i, schedule));
}

Tensor FiniteAtomPrior::tweedie_vjp(const Tensor& x, std::size_t i, const NoiseSchedule& schedule,
                                    const Tensor& v) const {
    require_same_shape(x, v, "tweedie_vjp");
    require_positive_step(i, "tweedie_vjp");
    // d mu / dx = sqrt(ab) / (1 - ab) * Cov_gamma[x0], which is symmetric.
    const std::vector<double> gamma = responsibilities(x, i, schedule);
    const Tensor mu = weighted_atom_mean(gamma);
    const double ab = schedule.alpha_bar(i);
    const double gain = std::sqrt(ab) / (1.0 - ab);
    Tensor out(x.shape());
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        if (gamma[k] == 0.0) continue;
        const Tensor& a = atoms_[k];
        double proj = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) proj += (a[j] - mu[j]) * v[j];
        const double coef = gain * gamma[k] * proj;
        for (std::size_t j = 0; j < a.size(); ++j) out[j] += coef * (a[j] - mu[j]);
    }
    return out;
}

FiniteAtomPrior FiniteAtomPrior::reweighted(std::vector<double> weights) const {
    return FiniteAtomPrior(atoms_, std::move(weights));
}

// ---------------------------------------------------------------------------
// GaussianPrior

GaussianPrior::GaussianPrior(Tensor mean, double variance) : mean_(std::move(mean)), variance_(variance) {
    if (!(variance_ > 0.0)) throw std::invalid_argument("Gaussian prior variance must be positive");
}

double GaussianPrior::marginal_variance(std::size_t i, const NoiseSchedule& schedule) const {
    const double ab = schedule.alpha_bar(i);
    return ab * variance_ + (1.0 - ab);
}

double GaussianPrior::tweedie_gain(std::size_t i, const NoiseSchedule& schedule) const {
    return std::sqrt(schedule.alpha_bar(i)) * variance_ / marginal_variance(i, schedule);
}

double GaussianPrior::posterior_variance(std::size_t i, const NoiseSchedule& schedule) const {
    return variance_ * (1.0 - schedule.alpha_bar(i)) / marginal_variance(i, schedule);
}

Tensor GaussianPrior::marginal_score(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    require_same_shape(mean_, x, "marginal_score");
    Tensor score = scale(mean_, std::sqrt(schedule.alpha_bar(i)));
    score -= x;
    score *= 1.0 / marginal_variance(i, schedule);
    return score;
}

double GaussianPrior::log_marginal_density(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    const double var = marginal_variance(i, schedule);
    Tensor d = x;
    d.axpy(-std::sqrt(schedule.alpha_bar(i)), mean_);
    return -norm2_squared(d) / (2.0 * var) - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var);
}

Tensor GaussianPrior::tweedie_mean(const Tensor& x, std::size_t i, const NoiseSchedule& schedule) const {
    require_same_shape(mean_, x, "tweedie_mean");
    Tensor centred = x;
    centred.axpy(-std::sqrt(schedule.alpha_bar(i)), mean_);
    Tensor out = mean_;
    out.axpy(tweedie_gain(i, schedule), centred);
    return out;
}

Tensor GaussianPrior::tweedie_vjp(const Tensor& x, std::size_t i, const NoiseSchedule& schedule,
                                  const Tensor& v) const {
    require_same_shape(x, v, "tweedie_vjp");
    return scale(v, tweedie_gain(i, schedule));
}

// ---------------------------------------------------------------------------

Tensor finite_difference_vjp(const std::function<Tensor(const Tensor&)>& fn, const Tensor& x, const Tensor& v,
                             double h) {
    Tensor out(x.shape());
    Tensor probe = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        probe[j] = x[j] + h;
        const double up = dot(v, fn(probe));
        probe[j] = x[j] - h;
        const double down = dot(v, fn(probe));
        probe[j] = x[j];
        out[j] = (up - down) / (2.0 * h);
    }
    return out;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& fn, const Tensor& x, double h) {
    Tensor out(x.shape());
    Tensor probe = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        probe[j] = x[j] + h;
        const double up = fn(probe);
        probe[j] = x[j] - h;
        const double down = fn(probe);
        probe[j] = x[j];
        out[j] = (up - down) / (2.0 * h);
    }
    return out;
}

FiniteAtomPrior load_atom_prior(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".dpgt") files.push_back(entry.path());
    }
    if (files.empty()) throw std::runtime_error("no .dpgt atoms in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<Tensor> atoms;
    for (const auto& f : files) atoms.push_back(read_dpgt(f));

    const auto weights_path = dir / "weights.txt";
    if (!std::filesystem::exists(weights_path)) return FiniteAtomPrior(std::move(atoms));
    std::ifstream in(weights_path);
    std::vector<double> weights;
    double w = 0.0;
    while (in >> w) weights.push_back(w);
    if (weights.size() != atoms.size()) {
        throw std::runtime_error("weights.txt has " + std::to_string(weights.size()) + " entries for " +
                                 std::to_string(atoms.size()) + " atoms");
    }
    return FiniteAtomPrior(std::move(atoms), std::move(weights));
}

}  // namespace dpg
