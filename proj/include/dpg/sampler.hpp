// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpg/guidance.hpp"
#include "dpg/operators.hpp"
#include "dpg/prior.hpp"
#include "dpg/random.hpp"
#include "dpg/schedule.hpp"

namespace dpg {

class SamplerError : public std::runtime_error {
public:
    SamplerError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

enum class SolverKind { ddpm, ddim };

std::string to_string(SolverKind kind);
SolverKind solver_from_string(const std::string& name);

struct SolverSpec {
    SolverKind kind = SolverKind::ddpm;
    /// Number of visited steps for DDIM (uniform subsequence). DDPM visits all N.
    std::size_t steps = 200;

    friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

/// One DDPM update. `score` is sigma_i * grad log p_i (score form, not the
/// noise prediction):
///   x_{i-1} = x_i / sqrt(alpha_i) + (1 - alpha_i) / sqrt(1 - alpha_bar_i) * score + sqrt(beta_i) z,
/// with z drawn from stream.substream("ddpm", i) and omitted at i = 1.
Tensor ddpm_step(const Tensor& x, const Tensor& score, std::size_t i, const NoiseSchedule& schedule,
                 const RandomStream& stream);
/// Same update with an explicit noise draw (pass zeros to get the mean).
Tensor ddpm_step_with_noise(const Tensor& x, const Tensor& score, std::size_t i, const NoiseSchedule& schedule,
                            const Tensor& z);

/// Deterministic DDIM (eta = 0) jump from i to i_prev < i. `eps` is the noise
/// prediction, -sigma_i * grad log p_i.
Tensor ddim_step(const Tensor& x, const Tensor& eps, std::size_t i, std::size_t i_prev,
                 const NoiseSchedule& schedule);

/// Visited steps in decreasing order, ending with 0 as the final target.
/// DDPM: N, N-1, ..., 1, 0. DDIM: round(k N / S) for k = S..0.
std::vector<std::size_t> visited_steps(const SolverSpec& solver, std::size_t n_steps);

struct TraceRecord {
    std::size_t step = 0;  // 0-based position in the visit order
    std::size_t i = 0;
    double r = 0.0;
    double recon_l2 = 0.0;  // |y - A(mu_i)|_2
    double s_tilde_norm = 0.0;
    std::optional<double> cos_oracle;
};

struct SamplerTrace {
    std::vector<TraceRecord> records;
    double wall_seconds = 0.0;
};

/// CSV with header step,i,r_i,recon_l2,s_tilde_norm,cos_oracle. Numbers use
/// the shortest round-trip form; an absent cosine is an empty field.
std::string trace_to_csv(const SamplerTrace& trace);

struct SolveOptions {
    /// Also evaluate the exact guidance and record cos(s~, exact) per step.
    bool record_oracle_cosine = false;
    /// Steps at which to keep a copy of mu_i(x_i).
    std::vector<std::size_t> snapshot_steps;
    /// Start from this x_N instead of a fresh N(0, I) draw.
    std::optional<Tensor> initial_state;
    /// Stop on reaching this step: its trace row holds r and recon_l2 only
    /// (s_tilde_norm = 0) and x0 is then the state x_i, not a final sample.
    std::optional<std::size_t> stop_at;
};

struct Snapshot {
    std::size_t i;
    Tensor mu;
};

struct SolveResult {
    Tensor x0;
    SamplerTrace trace;
    std::vector<Snapshot> snapshots;
};

/// Guided reverse diffusion. Per visited step: epsilon, mu_i, r_i, the
/// guidance direction s~ from the configured estimator, the combined score
/// s_i = rescale_and_combine(-epsilon, s~) (the oracle estimator adds its exact
/// guidance without rescaling), then one DDPM or DDIM update.
SolveResult solve_inverse(const ScoreModel& model, const InverseProblem& problem, const GuidanceConfig& cfg,
                          const SolverSpec& solver, const NoiseSchedule& schedule, std::uint64_t seed,
                          const SolveOptions& options = {});

}  // namespace dpg
