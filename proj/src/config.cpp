// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dpg/corpus.hpp"

namespace dpg {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!keys.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) {
        out.reset();
        return;
    }
    T value{};
    read(j, key, value, where);
    out = value;
}

template <typename T, typename F>
void read_enum(const json& j, const char* key, T& out, F parse, const std::string& where) {
    if (!j.contains(key)) return;
    std::string name;
    read(j, key, name, where);
    try {
        out = parse(name);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

TruthMode truth_mode_from_string(const std::string& s) {
    if (s == "atom") return TruthMode::atom;
    if (s == "per_seed") return TruthMode::per_seed;
    if (s == "file") return TruthMode::file;
    throw std::invalid_argument("unknown truth mode '" + s + "'");
}

std::string to_string(TruthMode m) {
    switch (m) {
        case TruthMode::atom: return "atom";
        case TruthMode::per_seed: return "per_seed";
        case TruthMode::file: return "file";
    }
    return "unknown";
}

ScheduleParams parse_schedule(const json& j) {
    check_keys(j, "schedule", {"n_steps", "beta_start", "beta_end"});
    ScheduleParams p;
    read(j, "n_steps", p.n_steps, "schedule");
    read(j, "beta_start", p.beta_start, "schedule");
    read(j, "beta_end", p.beta_end, "schedule");
    return p;
}

PriorSpec parse_prior(const json& j) {
    check_keys(j, "prior", {"source", "atoms", "weights", "shape", "dir", "mean", "variance", "count", "dim", "seed"});
    PriorSpec p;
    read_enum(j, "source", p.source, prior_source_from_string, "prior");
    read(j, "atoms", p.atoms, "prior");
    read(j, "weights", p.weights, "prior");
    read(j, "shape", p.shape, "prior");
    read(j, "dir", p.dir, "prior");
    read(j, "mean", p.mean, "prior");
    read(j, "variance", p.variance, "prior");
    read(j, "count", p.count, "prior");
    read(j, "dim", p.dim, "prior");
    read(j, "seed", p.seed, "prior");
    return p;
}

OperatorSpec parse_operator(const json& j) {
    const std::string w = "problem.operator";
    check_keys(j, w, {"kind", "keep", "keep_fraction", "factor", "kernel_size", "blur_std", "motion_length",
                      "angle_deg", "gain", "seed"});
    OperatorSpec s;
    read_enum(j, "kind", s.kind, operator_kind_from_string, w);
    read(j, "keep", s.keep, w);
    read(j, "keep_fraction", s.keep_fraction, w);
    read(j, "factor", s.factor, w);
    read(j, "kernel_size", s.kernel_size, w);
    read(j, "blur_std", s.blur_std, w);
    read(j, "motion_length", s.motion_length, w);
    read_optional(j, "angle_deg", s.angle_deg, w);
    read(j, "gain", s.gain, w);
    read(j, "seed", s.seed, w);
    return s;
}

NoiseModel parse_noise(const json& j) {
    const std::string w = "problem.noise";
    check_keys(j, w, {"kind", "sigma_y", "lambda", "intensity_scale"});
    NoiseModel n;
    read_enum(j, "kind", n.kind, noise_kind_from_string, w);
    read(j, "sigma_y", n.sigma_y, w);
    read(j, "lambda", n.lambda, w);
    read(j, "intensity_scale", n.intensity_scale, w);
    return n;
}

ProblemSpec parse_problem(const json& j) {
    check_keys(j, "problem", {"operator", "noise", "truth", "y", "problem_seed"});
    ProblemSpec p;
    if (j.contains("operator")) p.op = parse_operator(j.at("operator"));
    if (j.contains("noise")) p.noise = parse_noise(j.at("noise"));
    if (j.contains("truth")) {
        const json& t = j.at("truth");
        check_keys(t, "problem.truth", {"mode", "index", "path"});
        read_enum(t, "mode", p.truth.mode, truth_mode_from_string, "problem.truth");
        read(t, "index", p.truth.index, "problem.truth");
        read(t, "path", p.truth.path, "problem.truth");
    }
    read_optional(j, "y", p.y, "problem");
    read(j, "problem_seed", p.problem_seed, "problem");
    return p;
}

GuidanceConfig parse_guidance(const json& j) {
    check_keys(j, "guidance",
               {"estimator", "n_mc", "guidance_norm", "rescale", "z_mode", "r_floor", "forced_r", "loo_baseline"});
    GuidanceConfig g;
    read_enum(j, "estimator", g.estimator, estimator_from_string, "guidance");
    read(j, "n_mc", g.n_mc, "guidance");
    read(j, "guidance_norm", g.guidance_norm, "guidance");
    read_enum(j, "rescale", g.rescale, rescale_from_string, "guidance");
    read_enum(j, "z_mode", g.z_mode, z_mode_from_string, "guidance");
    read(j, "r_floor", g.r_floor, "guidance");
    read_optional(j, "forced_r", g.forced_r, "guidance");
    read(j, "loo_baseline", g.loo_baseline, "guidance");
    return g;
}

}  // namespace

std::string to_string(PriorSource source) {
    switch (source) {
        case PriorSource::toy_corpus: return "toy_corpus";
        case PriorSource::atoms: return "atoms";
        case PriorSource::atoms_dir: return "atoms_dir";
        case PriorSource::gaussian: return "gaussian";
        case PriorSource::random_atoms: return "random_atoms";
    }
    return "unknown";
}

PriorSource prior_source_from_string(const std::string& name) {
    if (name == "toy_corpus") return PriorSource::toy_corpus;
    if (name == "atoms") return PriorSource::atoms;
    if (name == "atoms_dir") return PriorSource::atoms_dir;
    if (name == "gaussian") return PriorSource::gaussian;
    if (name == "random_atoms") return PriorSource::random_atoms;
    throw std::invalid_argument("unknown prior source '" + name + "'");
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, "config", {"schedule", "prior", "problem", "guidance", "solver", "seeds", "output_dir", "threads",
                             "record_oracle_cosine", "write_artifacts", "psnr_max", "sweep", "compare"});
    ExperimentConfig c;
    if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"));
    if (j.contains("prior")) c.prior = parse_prior(j.at("prior"));
    if (j.contains("problem")) c.problem = parse_problem(j.at("problem"));
    if (j.contains("guidance")) c.guidance = parse_guidance(j.at("guidance"));
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        check_keys(s, "solver", {"kind", "steps"});
        read_enum(s, "kind", c.solver.kind, solver_from_string, "solver");
        read(s, "steps", c.solver.steps, "solver");
    }
    read(j, "seeds", c.seeds, "config");
    read(j, "output_dir", c.output_dir, "config");
    read(j, "threads", c.threads, "config");
    read(j, "record_oracle_cosine", c.record_oracle_cosine, "config");
    read(j, "write_artifacts", c.write_artifacts, "config");
    read(j, "psnr_max", c.psnr_max, "config");
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_keys(s, "sweep", {"n_mc", "guidance_norm", "sigma_y"});
        read(s, "n_mc", c.sweep.n_mc, "sweep");
        read(s, "guidance_norm", c.sweep.guidance_norm, "sweep");
        read(s, "sigma_y", c.sweep.sigma_y, "sweep");
    }
    if (j.contains("compare")) {
        const json& s = j.at("compare");
        check_keys(s, "compare", {"estimators", "fractions", "draws"});
        if (s.contains("estimators")) {
            std::vector<std::string> names;
            read(s, "estimators", names, "compare");
            c.compare.estimators.clear();
            for (const auto& n : names) {
                try {
                    c.compare.estimators.push_back(estimator_from_string(n));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("compare.estimators: ") + e.what());
                }
            }
        }
        read(s, "fractions", c.compare.fractions, "compare");
        read(s, "draws", c.compare.draws, "compare");
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["schedule"] = {{"n_steps", c.schedule.n_steps},
                     {"beta_start", c.schedule.beta_start},
                     {"beta_end", c.schedule.beta_end}};
    j["prior"] = {{"source", to_string(c.prior.source)},
                  {"atoms", c.prior.atoms},
                  {"weights", c.prior.weights},
                  {"shape", c.prior.shape},
                  {"dir", c.prior.dir},
                  {"mean", c.prior.mean},
                  {"variance", c.prior.variance},
                  {"count", c.prior.count},
                  {"dim", c.prior.dim},
                  {"seed", c.prior.seed}};
    const OperatorSpec& op = c.problem.op;
    json problem;
    problem["operator"] = {{"kind", to_string(op.kind)},
                           {"keep", op.keep},
                           {"keep_fraction", op.keep_fraction},
                           {"factor", op.factor},
                           {"kernel_size", op.kernel_size},
                           {"blur_std", op.blur_std},
                           {"motion_length", op.motion_length},
                           {"angle_deg", optional_json(op.angle_deg)},
                           {"gain", op.gain},
                           {"seed", op.seed}};
    problem["noise"] = {{"kind", to_string(c.problem.noise.kind)},
                        {"sigma_y", c.problem.noise.sigma_y},
                        {"lambda", c.problem.noise.lambda},
                        {"intensity_scale", c.problem.noise.intensity_scale}};
    problem["truth"] = {{"mode", to_string(c.problem.truth.mode)},
                        {"index", c.problem.truth.index},
                        {"path", c.problem.truth.path}};
    problem["y"] = optional_json(c.problem.y);
    problem["problem_seed"] = c.problem.problem_seed;
    j["problem"] = problem;
    const GuidanceConfig& g = c.guidance;
    j["guidance"] = {{"estimator", to_string(g.estimator)},
                     {"n_mc", g.n_mc},
                     {"guidance_norm", g.guidance_norm},
                     {"rescale", to_string(g.rescale)},
                     {"z_mode", to_string(g.z_mode)},
                     {"r_floor", g.r_floor},
                     {"forced_r", optional_json(g.forced_r)},
                     {"loo_baseline", g.loo_baseline}};
    j["solver"] = {{"kind", to_string(c.solver.kind)}, {"steps", c.solver.steps}};
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    j["threads"] = c.threads;
    j["record_oracle_cosine"] = c.record_oracle_cosine;
    j["write_artifacts"] = c.write_artifacts;
    j["psnr_max"] = c.psnr_max;
    j["sweep"] = {{"n_mc", c.sweep.n_mc}, {"guidance_norm", c.sweep.guidance_norm}, {"sigma_y", c.sweep.sigma_y}};
    std::vector<std::string> estimators;
    for (auto e : c.compare.estimators) estimators.push_back(to_string(e));
    j["compare"] = {{"estimators", estimators}, {"fractions", c.compare.fractions}, {"draws", c.compare.draws}};
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw ConfigError("seeds must be nonempty");
    if (cfg.output_dir.empty()) throw ConfigError("output_dir must be nonempty");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (!(cfg.psnr_max > 0.0)) throw ConfigError("psnr_max must be positive");
    try {
        build_linear_schedule(cfg.schedule);
        validate(cfg.guidance);
        validate(cfg.problem.noise);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.solver.kind == SolverKind::ddim && (cfg.solver.steps < 1 || cfg.solver.steps > cfg.schedule.n_steps)) {
        throw ConfigError("solver.steps must lie in 1..n_steps");
    }
    const PriorSpec& p = cfg.prior;
    if (p.source == PriorSource::atoms_dir && !std::filesystem::is_directory(p.dir)) {
        throw ConfigError("prior.dir does not exist: " + p.dir);
    }
    if (p.source == PriorSource::atoms && p.atoms.empty()) throw ConfigError("prior.atoms must be nonempty");
    if (p.source == PriorSource::gaussian && (p.shape.empty() || !(p.variance > 0.0))) {
        throw ConfigError("gaussian prior needs a shape and positive variance");
    }
    if (p.source == PriorSource::random_atoms && (p.count < 1 || p.dim < 1)) {
        throw ConfigError("random_atoms needs count >= 1 and dim >= 1");
    }
    if (cfg.problem.truth.mode == TruthMode::file && !std::filesystem::is_regular_file(cfg.problem.truth.path)) {
        throw ConfigError("problem.truth.path does not exist: " + cfg.problem.truth.path);
    }
    for (double f : cfg.compare.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("compare.fractions must lie in (0, 1]");
    }
    for (std::size_t n : cfg.sweep.n_mc) {
        if (n < 2) throw ConfigError("sweep.n_mc values must be >= 2");
    }
    for (double b : cfg.sweep.guidance_norm) {
        if (!(b >= 0.0)) throw ConfigError("sweep.guidance_norm values must be non-negative");
    }
    for (double s : cfg.sweep.sigma_y) {
        if (!(s > 0.0)) throw ConfigError("sweep.sigma_y values must be positive");
    }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    auto parse_u64 = [&](const std::string& s) -> std::uint64_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
            throw ConfigError("invalid seed '" + s + "' in list '" + text + "'");
        }
        return std::stoull(s);
    };
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(parse_u64(item));
            continue;
        }
        const std::uint64_t lo = parse_u64(item.substr(0, dash));
        const std::uint64_t hi = parse_u64(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("descending seed range '" + item + "'");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    if (seeds.empty()) throw ConfigError("empty seed list");
    return seeds;
}

std::shared_ptr<const ScoreModel> build_prior(const PriorSpec& spec) {
    switch (spec.source) {
        case PriorSource::toy_corpus: {
            auto atoms = toy_corpus();
            if (spec.weights.empty()) return std::make_shared<FiniteAtomPrior>(std::move(atoms));
            return std::make_shared<FiniteAtomPrior>(std::move(atoms), spec.weights);
        }
        case PriorSource::atoms: {
            std::vector<Tensor> atoms;
            for (const auto& values : spec.atoms) {
                const Shape shape = spec.shape.empty() ? Shape{values.size()} : spec.shape;
                atoms.emplace_back(shape, values);
            }
            if (spec.weights.empty()) return std::make_shared<FiniteAtomPrior>(std::move(atoms));
            return std::make_shared<FiniteAtomPrior>(std::move(atoms), spec.weights);
        }
        case PriorSource::atoms_dir: return std::make_shared<FiniteAtomPrior>(load_atom_prior(spec.dir));
        case PriorSource::gaussian: return std::make_shared<GaussianPrior>(Tensor(spec.shape, spec.mean), spec.variance);
        case PriorSource::random_atoms: {
            const RandomStream root(spec.seed);
            std::vector<Tensor> atoms;
            for (std::size_t k = 0; k < spec.count; ++k) {
                RandomStream s = root.substream("atom", k);
                atoms.push_back(draw_normal(s, {spec.dim}));
            }
            if (spec.weights.empty()) return std::make_shared<FiniteAtomPrior>(std::move(atoms));
            return std::make_shared<FiniteAtomPrior>(std::move(atoms), spec.weights);
        }
    }
    throw ConfigError("unknown prior source");
}

}  // namespace dpg
