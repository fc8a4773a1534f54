// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "dpg/random.hpp"
#include "dpg/tensor.hpp"

namespace dpg {

/// Discrete variance-preserving schedule. Indices follow the sampler: step i
/// runs from 1 to N, and alpha_bar(0) = 1 denotes clean data.
class NoiseSchedule {
public:
    /// Builds from explicit betas (beta_1..beta_N), each in (0,1).
    explicit NoiseSchedule(std::vector<double> betas);

    std::size_t n_steps() const { return beta_.size(); }

    double beta(std::size_t i) const;
    double alpha(std::size_t i) const;
    double alpha_bar(std::size_t i) const;  // valid for 0..N
    /// sqrt(1 - alpha_bar(i)); zero at i = 0.
    double sigma(std::size_t i) const;

    const std::vector<double>& betas() const { return beta_; }

private:
    void check_step(std::size_t i) const;

    std::vector<double> beta_;       // beta_[i-1] = beta_i
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;  // alpha_bar_[i], i = 0..N
    std::vector<double> sigma_;      // sigma_[i], i = 0..N
};

struct ScheduleParams {
    std::size_t n_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    friend bool operator==(const ScheduleParams&, const ScheduleParams&) = default;
};

/// beta_i linear in i from beta_start (i = 1) to beta_end (i = N).
NoiseSchedule build_linear_schedule(std::size_t n_steps, double beta_start, double beta_end);
inline NoiseSchedule build_linear_schedule(const ScheduleParams& p) {
    return build_linear_schedule(p.n_steps, p.beta_start, p.beta_end);
}

/// sqrt(alpha_bar_i) x0 + sqrt(1 - alpha_bar_i) z with z drawn from `stream`.
Tensor diffuse_sample(const Tensor& x0, std::size_t i, const NoiseSchedule& schedule, RandomStream& stream);
/// Same map with a caller-supplied standard-normal draw z.
Tensor diffuse_with_noise(const Tensor& x0, std::size_t i, const NoiseSchedule& schedule, const Tensor& z);

}  // namespace dpg
