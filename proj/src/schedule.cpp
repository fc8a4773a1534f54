// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpg {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
    if (beta_.empty()) throw std::invalid_argument("noise schedule needs at least one step");
    alpha_.reserve(beta_.size());
    alpha_bar_.reserve(beta_.size() + 1);
    sigma_.reserve(beta_.size() + 1);
    alpha_bar_.push_back(1.0);
    sigma_.push_back(0.0);
    for (double b : beta_) {
        if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("beta must lie in (0,1), got " + std::to_string(b));
        alpha_.push_back(1.0 - b);
        alpha_bar_.push_back(alpha_bar_.back() * alpha_.back());
        sigma_.push_back(std::sqrt(1.0 - alpha_bar_.back()));
    }
}

void NoiseSchedule::check_step(std::size_t i) const {
    if (i < 1 || i > n_steps()) {
        throw std::out_of_range("step " + std::to_string(i) + " outside 1.." + std::to_string(n_steps()));
    }
}

double NoiseSchedule::beta(std::size_t i) const {
    check_step(i);
    return beta_[i - 1];
}

double NoiseSchedule::alpha(std::size_t i) const {
    check_step(i);
    return alpha_[i - 1];
}

double NoiseSchedule::alpha_bar(std::size_t i) const {
    if (i > n_steps()) throw std::out_of_range("step " + std::to_string(i) + " outside 0.." + std::to_string(n_steps()));
    return alpha_bar_[i];
}

double NoiseSchedule::sigma(std::size_t i) const {
    if (i > n_steps()) throw std::out_of_range("step " + std::to_string(i) + " outside 0.." + std::to_string(n_steps()));
    return sigma_[i];
}

NoiseSchedule build_linear_schedule(std::size_t n_steps, double beta_start, double beta_end) {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw std::invalid_argument("need 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = n_steps == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n_steps - 1);
        betas[k] = beta_start + t * (beta_end - beta_start);
    }
    return NoiseSchedule(std::move(betas));
}

Tensor diffuse_with_noise(const Tensor& x0, std::size_t i, const NoiseSchedule& schedule, const Tensor& z) {
    const double ab = schedule.alpha_bar(i);
    if (i == 0) return x0;
    Tensor out = scale(x0, std::sqrt(ab));
    out.axpy(std::sqrt(1.0 - ab), z);
    return out;
}

Tensor diffuse_sample(const Tensor& x0, std::size_t i, const NoiseSchedule& schedule, RandomStream& stream) {
    if (i > schedule.n_steps()) throw std::out_of_range("diffusion step " + std::to_string(i) + " out of range");
    if (i == 0) return x0;
    return diffuse_with_noise(x0, i, schedule, draw_normal(stream, x0.shape()));
}

}  // namespace dpg
