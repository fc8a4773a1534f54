// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpg/config.hpp"
#include "dpg/oracle.hpp"
#include "dpg/sampler.hpp"

namespace dpg {

double mse(const Tensor& a, const Tensor& b);
/// 10 log10(max_val^2 / MSE); +infinity when the inputs are identical.
double psnr(const Tensor& a, const Tensor& b, double max_val);

/// JSON number, or the strings "inf", "-inf", "nan" for non-finite values.
nlohmann::json json_number(double v);

/// Runs fn(0..n-1) on up to `threads` workers. Each index runs exactly once;
/// the first exception is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct ProblemInstance {
    Tensor truth;
    std::optional<std::size_t> truth_atom;
    InverseProblem problem;
};

/// Ground truth and observation for one run seed. Fixed-truth modes ignore
/// `seed` and synthesize y from problem_seed; per_seed draws both from `seed`.
ProblemInstance build_problem(const ExperimentConfig& cfg, const ScoreModel& prior, std::uint64_t seed);

/// One prior draw: an atom index by weight for atom priors, mean + sqrt(v) z for Gaussians.
Tensor sample_prior(const ScoreModel& prior, RandomStream& stream, std::optional<std::size_t>* atom = nullptr);

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double psnr = 0.0;
    double mse = 0.0;
    double recon_loss = 0.0;
    std::optional<std::size_t> nearest_atom;
    double wall_seconds = 0.0;
    Tensor x0;
};

struct Aggregate {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
    std::size_t count = 0;
};

Aggregate aggregate(const std::vector<double>& values);

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<SeedResult> seeds;
    Aggregate psnr;
    Aggregate mse;
    Aggregate recon_loss;
    std::size_t failed = 0;
    /// Present for finite-atom priors with a fixed observation and an exact oracle.
    std::optional<double> tv_distance;
    std::vector<double> posterior_weights;
    std::vector<double> empirical_frequencies;
};

/// Runs every seed in memory (parallel over cfg.threads) without touching the
/// file system unless cfg.write_artifacts, in which case per-seed traces and
/// images go under cfg.output_dir.
ExperimentReport evaluate_experiment(const ExperimentConfig& cfg);

/// evaluate_experiment plus report.json and timing.json in cfg.output_dir.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Wall times are kept out of the report so reruns produce identical bytes.
nlohmann::json report_to_json(const ExperimentReport& report);
nlohmann::json timing_to_json(const ExperimentReport& report);

struct CompareRow {
    EstimatorKind estimator;
    double fraction;
    std::size_t i;
    double mean_cosine;
    double mean_recon_l2;
    std::size_t draws;
};

/// Per (estimator, timestep) averages over cfg.compare.draws independent
/// draws of (x0, y, x_i) from the prior, the observation model and the
/// forward process. The cosine is taken against exact_guidance_score; the
/// reconstruction column is |y - A(mu_{i-1})|_2 after one noise-free guided
/// DDPM step from x_i. Randomness derives from cfg.seeds.front().
std::vector<CompareRow> compare_estimators(const ExperimentConfig& cfg);
std::string compare_to_csv(const std::vector<CompareRow>& rows);

struct SweepRow {
    std::size_t n_mc;
    double guidance_norm;
    double sigma_y;
    ExperimentReport report;
};

/// Cartesian grid over cfg.sweep; an empty axis keeps the base value.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Writes truth.dpgt, y.dpgt, problem.json (and PGM previews for image
/// shapes) into `out_dir`.
ProblemInstance make_problem_files(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out_dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dpg
