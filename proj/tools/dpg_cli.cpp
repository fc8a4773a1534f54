// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

// dpg: command-line driver for guided posterior sampling experiments.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpg/config.hpp"
#include "dpg/experiment.hpp"
#include "dpg/invariants.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
    std::string config_path;
    std::string seeds;
    std::string out;
    std::size_t threads = 0;
};

class CliFailure : public std::runtime_error {
public:
    CliFailure(std::string type, const std::string& message, int code, json extra = json::object())
        : std::runtime_error(message), type_(std::move(type)), code_(code), extra_(std::move(extra)) {}
    const std::string& type() const { return type_; }
    int code() const { return code_; }
    const json& extra() const { return extra_; }

private:
    std::string type_;
    int code_;
    json extra_;
};

int emit_error(const std::string& command, const std::string& type, const std::string& message, int code,
               const json& extra = json::object()) {
    json err = {{"ok", false}, {"command", command}, {"error", {{"type", type}, {"message", message}}}};
    for (const auto& [k, v] : extra.items()) err["error"][k] = v;
    std::cerr << err.dump() << std::endl;
    return code;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
    auto* opt = cmd->add_option("--config", flags.config_path, "experiment config (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", flags.seeds, "seed list, e.g. 1,2,10-19 (overrides config)");
    cmd->add_option("--out", flags.out, "output directory (overrides config)");
    cmd->add_option("--threads", flags.threads, "worker threads (overrides config)")->check(CLI::PositiveNumber);
}

dpg::ExperimentConfig resolve_config(const CommonFlags& flags) {
    dpg::ExperimentConfig cfg;
    if (!flags.config_path.empty()) cfg = dpg::load_config(flags.config_path);
    if (!flags.seeds.empty()) cfg.seeds = dpg::parse_seed_list(flags.seeds);
    if (!flags.out.empty()) cfg.output_dir = flags.out;
    if (flags.threads > 0) cfg.threads = flags.threads;
    dpg::validate(cfg);
    return cfg;
}

void print_ok(const std::string& command, json details) {
    details["ok"] = true;
    details["command"] = command;
    std::cout << details.dump() << std::endl;
}

int cmd_make_problem(const CommonFlags& flags) {
    const auto cfg = resolve_config(flags);
    const auto inst = dpg::make_problem_files(cfg, cfg.seeds.front(), cfg.output_dir);
    print_ok("make-problem", {{"out", cfg.output_dir}, {"y_size", inst.problem.y.size()}});
    return 0;
}

int cmd_run(const CommonFlags& flags) {
    const auto cfg = resolve_config(flags);
    const auto report = dpg::run_experiment(cfg);
    json summary = {{"out", cfg.output_dir},
                    {"seeds", report.seeds.size()},
                    {"failed", report.failed},
                    {"psnr_mean", dpg::json_number(report.psnr.mean)}};
    if (report.tv_distance) summary["tv_distance"] = *report.tv_distance;
    if (report.failed > 0) {
        json failed = json::array();
        for (const auto& s : report.seeds) {
            if (!s.ok) failed.push_back({{"seed", s.seed}, {"message", s.error}});
        }
        throw CliFailure("SeedFailure", std::to_string(report.failed) + " seed(s) failed; report written", 3,
                         {{"failed", failed}, {"out", cfg.output_dir}});
    }
    print_ok("run", summary);
    return 0;
}

int cmd_compare(const CommonFlags& flags) {
    const auto cfg = resolve_config(flags);
    const auto rows = dpg::compare_estimators(cfg);
    const std::string csv = dpg::compare_to_csv(rows);
    dpg::write_text_file(std::filesystem::path(cfg.output_dir) / "compare.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_sweep(const CommonFlags& flags) {
    const auto cfg = resolve_config(flags);
    const auto rows = dpg::sweep(cfg);
    const std::filesystem::path out(cfg.output_dir);
    dpg::write_text_file(out / "sweep.csv", dpg::sweep_to_csv(rows));
    json points = json::array();
    for (const auto& r : rows) {
        json report = dpg::report_to_json(r.report);
        report.erase("config");
        points.push_back({{"n_mc", r.n_mc}, {"guidance_norm", r.guidance_norm}, {"sigma_y", r.sigma_y},
                          {"report", report}});
    }
    dpg::write_text_file(out / "sweep.json", json{{"config", dpg::config_to_json(cfg)}, {"points", points}}.dump(2) +
                                                   "\n");
    std::cout << dpg::sweep_to_csv(rows);
    return 0;
}

int cmd_oracle_check(const CommonFlags& flags) {
    std::uint64_t seed = 0;
    std::optional<dpg::ExperimentConfig> cfg;
    if (!flags.config_path.empty()) {
        cfg = resolve_config(flags);
        seed = cfg->seeds.front();
    }
    if (!flags.seeds.empty()) seed = dpg::parse_seed_list(flags.seeds).front();
    const auto results = dpg::run_invariant_suite(seed);
    const json j = dpg::invariants_to_json(results);
    const std::string out = !flags.out.empty() ? flags.out : (cfg ? cfg->output_dir : std::string());
    if (!out.empty()) dpg::write_text_file(std::filesystem::path(out) / "invariants.json", j.dump(2) + "\n");
    if (!j["all_pass"].get<bool>()) {
        json failed = json::array();
        for (const auto& r : results) {
            if (!r.pass) failed.push_back({{"name", r.group + "/" + r.name}, {"value", r.value}, {"tolerance", r.tolerance}});
        }
        throw CliFailure("InvariantFailure", "invariant checks failed", 4, {{"failed", failed}});
    }
    std::cout << j.dump(2) << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Guided diffusion posterior sampling with policy-gradient guidance"};
    app.require_subcommand(1);

    CommonFlags make_flags, run_flags, compare_flags, check_flags, sweep_flags;
    auto* make = app.add_subcommand("make-problem", "write ground truth and observation files");
    add_common(make, make_flags, true);
    auto* run = app.add_subcommand("run", "run the sampler over seeds; write report, traces and images");
    add_common(run, run_flags, true);
    auto* compare = app.add_subcommand("compare", "estimator accuracy table against the exact guidance");
    add_common(compare, compare_flags, true);
    auto* check = app.add_subcommand("oracle-check", "closed-form invariant suite");
    add_common(check, check_flags, false);
    auto* sweep = app.add_subcommand("sweep", "grid over n_mc, guidance_norm and sigma_y");
    add_common(sweep, sweep_flags, true);

    std::string command = "dpg";
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return emit_error(command, "UsageError", e.what(), 2);
    }

    command = app.get_subcommands().front()->get_name();
    try {
        if (make->parsed()) return cmd_make_problem(make_flags);
        if (run->parsed()) return cmd_run(run_flags);
        if (compare->parsed()) return cmd_compare(compare_flags);
        if (check->parsed()) return cmd_oracle_check(check_flags);
        if (sweep->parsed()) return cmd_sweep(sweep_flags);
    } catch (const CliFailure& e) {
        return emit_error(command, e.type(), e.what(), e.code(), e.extra());
    } catch (const dpg::ConfigError& e) {
        return emit_error(command, "ConfigError", e.what(), 2);
    } catch (const std::exception& e) {
        return emit_error(command, "RuntimeError", e.what(), 1);
    }
    return emit_error(command, "UsageError", "no subcommand", 2);
}
