// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpg/operators.hpp"
#include "dpg/prior.hpp"
#include "dpg/random.hpp"
#include "dpg/schedule.hpp"

namespace dpg {

class GuidanceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RescaleConvention {
    unit_norm,        // s = base + B * s~ / |s~|
    literal_sq_norm,  // s = base + B * s~ / |s~|^2
};

enum class ZMode {
    sum,        // Z_i = l_y(A(mu)), same form as the loss
    per_pixel,  // Z_i = r_i^2 for Gaussian noise, |y - A(mu)|_1 / d for Poisson
};

enum class EstimatorKind { dpg, dps, oracle };

std::string to_string(RescaleConvention v);
std::string to_string(ZMode v);
std::string to_string(EstimatorKind v);
RescaleConvention rescale_from_string(const std::string& s);
ZMode z_mode_from_string(const std::string& s);
EstimatorKind estimator_from_string(const std::string& s);

struct GuidanceConfig {
    std::size_t n_mc = 500;
    double guidance_norm = 1.0;
    RescaleConvention rescale = RescaleConvention::unit_norm;
    ZMode z_mode = ZMode::sum;
    double r_floor = 1e-4;
    EstimatorKind estimator = EstimatorKind::dpg;
    /// Replaces the residual-based r_i when set (used for limit studies).
    std::optional<double> forced_r;
    /// Leave-one-out baselines on; off gives the plain score-function estimate.
    bool loo_baseline = true;

    friend bool operator==(const GuidanceConfig&, const GuidanceConfig&) = default;
};

void validate(const GuidanceConfig& cfg);

/// Diagnostics of one DPG evaluation.
struct GuidanceStepState {
    Tensor mu;
    double r = 0.0;
    double z = 0.0;
    std::vector<double> losses;
    std::vector<double> costs;
    std::vector<double> baselines;
    Tensor s_tilde;
};

/// r_i = max(r_floor, sqrt(|y - A(mu)|^2 / numel(x))).
double residual_std(const InverseProblem& problem, const Tensor& mu, double r_floor);

/// Adaptive likelihood temperature Z_i, floored at r_floor^2.
double adaptive_z(const InverseProblem& problem, const Tensor& mu, ZMode mode, double r_floor);

/// c_m = exp(-(l_m - min_j l_j) / Z). Entries lie in (0, 1] with the minimum
/// loss mapped to exactly one; underflow is clamped to the smallest normal.
std::vector<double> costs_from_losses(const std::vector<double>& losses, double z);

/// Costs for explicit samples x0^(m), each evaluated through A and l_y.
std::vector<double> conditional_weights(const InverseProblem& problem, const std::vector<Tensor>& samples, double z);

/// b_m = (sum_{j != m} c_j) / (N - 1). Requires N >= 2.
std::vector<double> loo_baselines(const std::vector<double>& costs);

/// Direction of grad_x log p_i(y | x_i) by the policy-gradient estimate:
///   s~ = (1 / (r N)) * J^T sum_m (c_m - b_m) xi_m,   J = d mu / d x_i,
/// with x0^(m) = mu + r xi_m and xi_m drawn from stream.substream("dpg", i)
/// .substream("mc", m). The weighted noise sum is reduced in index order.
struct DpgResult {
    Tensor s_tilde;
    GuidanceStepState state;
};
DpgResult dpg_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x, std::size_t i,
                    const NoiseSchedule& schedule, const GuidanceConfig& cfg, const RandomStream& stream);

/// -grad_x l_y(A(mu_i(x))), the DPS guidance direction.
Tensor dps_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x, std::size_t i,
                 const NoiseSchedule& schedule);

/// base + B * s~ / |s~| (or / |s~|^2). A zero s~ returns base unchanged.
/// `base` is the unconditional term in score form, sigma_i * grad log p_i(x).
Tensor rescale_and_combine(const Tensor& base, const Tensor& s_tilde, const GuidanceConfig& cfg);

}  // namespace dpg
