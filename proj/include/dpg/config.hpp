// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpg/guidance.hpp"
#include "dpg/operators.hpp"
#include "dpg/prior.hpp"
#include "dpg/sampler.hpp"
#include "dpg/schedule.hpp"

namespace dpg {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class PriorSource {
    toy_corpus,    // built-in 32 procedural 16x16 images
    atoms,         // inline atom list
    atoms_dir,     // directory of .dpgt files
    gaussian,      // isotropic Gaussian
    random_atoms,  // `count` standard-normal atoms of length `dim`
};

std::string to_string(PriorSource source);
PriorSource prior_source_from_string(const std::string& name);

struct PriorSpec {
    PriorSource source = PriorSource::toy_corpus;
    // atoms: flat values, each reshaped to `shape`
    std::vector<std::vector<double>> atoms;
    std::vector<double> weights;
    Shape shape;
    std::string dir;
    // gaussian
    double mean = 0.0;
    double variance = 1.0;
    // random_atoms
    std::size_t count = 8;
    std::size_t dim = 16;
    std::uint64_t seed = 0;

    friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

enum class TruthMode {
    atom,      // fixed atom `index`
    per_seed,  // a fresh prior draw (and observation noise) per run seed
    file,      // .dpgt file
};

struct TruthSpec {
    TruthMode mode = TruthMode::atom;
    std::size_t index = 0;
    std::string path;

    friend bool operator==(const TruthSpec&, const TruthSpec&) = default;
};

struct ProblemSpec {
    OperatorSpec op;
    NoiseModel noise;
    TruthSpec truth;
    /// Explicit observation; when absent y is synthesized from the truth.
    std::optional<std::vector<double>> y;
    /// Seed for synthesizing y when the truth is fixed.
    std::uint64_t problem_seed = 0;

    friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

struct SweepGrid {
    std::vector<std::size_t> n_mc;
    std::vector<double> guidance_norm;
    std::vector<double> sigma_y;

    friend bool operator==(const SweepGrid&, const SweepGrid&) = default;
};

struct CompareSpec {
    std::vector<EstimatorKind> estimators{EstimatorKind::dpg, EstimatorKind::dps, EstimatorKind::oracle};
    std::vector<double> fractions{0.95, 0.9, 0.8};
    std::size_t draws = 20;

    friend bool operator==(const CompareSpec&, const CompareSpec&) = default;
};

struct ExperimentConfig {
    ScheduleParams schedule;
    PriorSpec prior;
    ProblemSpec problem;
    GuidanceConfig guidance;
    SolverSpec solver;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "out";
    std::size_t threads = 1;
    bool record_oracle_cosine = false;
    /// Per-seed traces and images; the report is always written.
    bool write_artifacts = true;
    double psnr_max = 1.0;
    SweepGrid sweep;
    CompareSpec compare;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Structural checks: seeds nonempty, referenced files exist, sub-configs valid.
void validate(const ExperimentConfig& cfg);

/// Parses "1,2,5-8" into {1,2,5,6,7,8}.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

std::shared_ptr<const ScoreModel> build_prior(const PriorSpec& spec);

}  // namespace dpg
