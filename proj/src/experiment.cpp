// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/experiment.hpp"

#include <atomic>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "dpg/tensor_io.hpp"

namespace dpg {

using nlohmann::json;

namespace {

constexpr const char* kMetricsNote =
    "Desk-scale metrics: PSNR, MSE, reconstruction loss and posterior TV distance. FID and LPIPS are not computed "
    "because they require pretrained networks.";

bool is_image_shape(const Shape& s) { return s.size() == 3 && (s[0] == 1 || s[0] == 3); }

void write_tensor_files(const std::filesystem::path& dir, const std::string& stem, const Tensor& t) {
    write_dpgt(dir / (stem + ".dpgt"), t);
    if (is_image_shape(t.shape())) write_netpbm(dir / (stem + (t.shape()[0] == 1 ? ".pgm" : ".ppm")), t);
}

const FiniteAtomPrior* as_atoms(const ScoreModel& m) { return dynamic_cast<const FiniteAtomPrior*>(&m); }

bool fixed_observation(const ExperimentConfig& cfg) { return cfg.problem.truth.mode != TruthMode::per_seed; }

std::vector<std::size_t> snapshot_steps(std::size_t n_steps) {
    std::vector<std::size_t> steps;
    for (double f : {0.9, 0.5, 0.1}) steps.push_back(static_cast<std::size_t>(std::llround(f * n_steps)));
    return steps;
}

// Shortest representation that round-trips.
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

double mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    return norm2_squared(a - b) / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double max_val) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / m);
}

json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

Tensor sample_prior(const ScoreModel& prior, RandomStream& stream, std::optional<std::size_t>* atom) {
    if (const auto* atoms = as_atoms(prior)) {
        const double u = stream.uniform();
        double acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < atoms->size(); ++k) {
            acc += atoms->weights()[k];
            if (u < acc) break;
        }
        if (atom) *atom = k;
        return atoms->atoms()[k];
    }
    if (const auto* gauss = dynamic_cast<const GaussianPrior*>(&prior)) {
        Tensor x = draw_normal(stream, gauss->shape());
        x *= std::sqrt(gauss->variance());
        x += gauss->mean();
        if (atom) atom->reset();
        return x;
    }
    throw ConfigError("cannot sample from this prior");
}

ProblemInstance build_problem(const ExperimentConfig& cfg, const ScoreModel& prior, std::uint64_t seed) {
    ProblemInstance inst;
    const TruthSpec& truth = cfg.problem.truth;
    switch (truth.mode) {
        case TruthMode::atom: {
            const auto* atoms = as_atoms(prior);
            if (!atoms) throw ConfigError("truth mode 'atom' needs a finite-atom prior");
            if (truth.index >= atoms->size()) {
                throw ConfigError("truth index " + std::to_string(truth.index) + " out of range for " +
                                  std::to_string(atoms->size()) + " atoms");
            }
            inst.truth = atoms->atoms()[truth.index];
            inst.truth_atom = truth.index;
            break;
        }
        case TruthMode::per_seed: {
            RandomStream s = RandomStream(seed).substream("truth", 0);
            inst.truth = sample_prior(prior, s, &inst.truth_atom);
            break;
        }
        case TruthMode::file: inst.truth = read_dpgt(truth.path); break;
    }
    if (inst.truth.shape() != prior.shape()) {
        throw ConfigError("truth shape " + shape_to_string(inst.truth.shape()) + " does not match prior shape " +
                          shape_to_string(prior.shape()));
    }
    OperatorPtr op = make_operator(cfg.problem.op, inst.truth.shape());
    if (cfg.problem.y) {
        Tensor y(op->output_shape(), *cfg.problem.y);
        inst.problem = InverseProblem{op, cfg.problem.noise, std::move(y), inst.truth.shape(), 0};
    } else {
        const std::uint64_t obs_seed = fixed_observation(cfg) ? cfg.problem.problem_seed : seed;
        RandomStream s = RandomStream(obs_seed).substream("observation", 0);
        inst.problem = synthesize_observation(op, cfg.problem.noise, inst.truth, s);
    }
    return inst;
}

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    a.count = values.size();
    if (values.empty()) {
        a.mean = std::numeric_limits<double>::quiet_NaN();
        a.std = std::numeric_limits<double>::quiet_NaN();
        return a;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return a;
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return a;
}

ExperimentReport evaluate_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const NoiseSchedule schedule = build_linear_schedule(cfg.schedule);
    const std::shared_ptr<const ScoreModel> prior = build_prior(cfg.prior);
    const std::filesystem::path out_dir(cfg.output_dir);

    std::optional<ProblemInstance> shared;
    if (fixed_observation(cfg)) {
        shared = build_problem(cfg, *prior, 0);
        if (cfg.write_artifacts) {
            std::filesystem::create_directories(out_dir);
            write_tensor_files(out_dir, "truth", shared->truth);
            write_tensor_files(out_dir, "y", shared->problem.y);
        }
    }

    SolveOptions options;
    options.record_oracle_cosine = cfg.record_oracle_cosine;
    if (cfg.write_artifacts) options.snapshot_steps = snapshot_steps(cfg.schedule.n_steps);

    ExperimentReport report;
    report.config = cfg;
    report.seeds.resize(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t k) {
        SeedResult& res = report.seeds[k];
        res.seed = cfg.seeds[k];
        const auto started = std::chrono::steady_clock::now();
        try {
            const ProblemInstance inst = shared ? *shared : build_problem(cfg, *prior, res.seed);
            SolveResult sol =
                solve_inverse(*prior, inst.problem, cfg.guidance, cfg.solver, schedule, res.seed, options);
            res.x0 = sol.x0;
            res.mse = mse(sol.x0, inst.truth);
            res.psnr = psnr(sol.x0, inst.truth, cfg.psnr_max);
            res.recon_loss = recon_loss(inst.problem.noise, inst.problem.y, inst.problem.op->apply(sol.x0));
            if (const auto* atoms = as_atoms(*prior)) res.nearest_atom = nearest_atom(atoms->atoms(), sol.x0);
            if (cfg.write_artifacts) {
                const std::filesystem::path dir = out_dir / ("seed_" + std::to_string(res.seed));
                std::filesystem::create_directories(dir);
                write_text_file(dir / "trace.csv", trace_to_csv(sol.trace));
                write_tensor_files(dir, "x0", sol.x0);
                for (const auto& snap : sol.snapshots) write_tensor_files(dir, "mu_" + std::to_string(snap.i), snap.mu);
                if (!shared) {
                    write_tensor_files(dir, "truth", inst.truth);
                    write_tensor_files(dir, "y", inst.problem.y);
                }
            }
            res.ok = true;
        } catch (const std::exception& e) {
            res.ok = false;
            res.error = e.what();
        }
        res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    });

    std::vector<double> ps, ms, rs;
    std::vector<Tensor> finals;
    for (const auto& r : report.seeds) {
        if (!r.ok) {
            ++report.failed;
            continue;
        }
        ps.push_back(r.psnr);
        ms.push_back(r.mse);
        rs.push_back(r.recon_loss);
        finals.push_back(r.x0);
    }
    report.psnr = aggregate(ps);
    report.mse = aggregate(ms);
    report.recon_loss = aggregate(rs);

    const auto* atoms = as_atoms(*prior);
    if (shared && atoms && has_exact_oracle(*prior, shared->problem) && !finals.empty()) {
        const PosteriorAtoms post = exact_posterior_atoms(*atoms, shared->problem);
        report.tv_distance = posterior_tv_distance(finals, post);
        report.posterior_weights = post.weights();
        report.empirical_frequencies.assign(atoms->size(), 0.0);
        for (const auto& x : finals) report.empirical_frequencies[nearest_atom(atoms->atoms(), x)] += 1.0;
        for (double& f : report.empirical_frequencies) f /= static_cast<double>(finals.size());
    }
    return report;
}

json report_to_json(const ExperimentReport& report) {
    json j;
    j["header"] = {
        {"metrics", kMetricsNote},
        {"poisson_forward_model", "y = Poisson(lambda * s * clip(A(x0), 0, inf)) / (lambda * s), s = intensity_scale"},
        {"guidance_norm", "desk-scale calibrated value, not an image-scale setting"},
    };
    j["config"] = config_to_json(report.config);
    json rows = json::array();
    for (const auto& r : report.seeds) {
        json row = {{"seed", r.seed}, {"ok", r.ok}};
        if (r.ok) {
            row["psnr"] = json_number(r.psnr);
            row["mse"] = json_number(r.mse);
            row["recon_loss"] = json_number(r.recon_loss);
            if (r.nearest_atom) row["nearest_atom"] = *r.nearest_atom;
        } else {
            row["error"] = r.error;
        }
        rows.push_back(row);
    }
    j["seeds"] = rows;
    auto agg = [](const Aggregate& a) {
        return json{{"mean", json_number(a.mean)}, {"std", json_number(a.std)}, {"count", a.count}};
    };
    j["aggregate"] = {{"psnr", agg(report.psnr)},
                      {"mse", agg(report.mse)},
                      {"recon_loss", agg(report.recon_loss)},
                      {"failed", report.failed}};
    if (report.tv_distance) {
        j["posterior"] = {{"tv_distance", *report.tv_distance},
                          {"exact_weights", report.posterior_weights},
                          {"empirical_frequencies", report.empirical_frequencies}};
    }
    return j;
}

json timing_to_json(const ExperimentReport& report) {
    json rows = json::array();
    double total = 0.0;
    for (const auto& r : report.seeds) {
        rows.push_back({{"seed", r.seed}, {"wall_seconds", r.wall_seconds}});
        total += r.wall_seconds;
    }
    return {{"seeds", rows}, {"total_seed_seconds", total}};
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    ExperimentReport report = evaluate_experiment(cfg);
    const std::filesystem::path out_dir(cfg.output_dir);
    write_text_file(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text_file(out_dir / "timing.json", timing_to_json(report).dump(2) + "\n");
    return report;
}

std::vector<CompareRow> compare_estimators(const ExperimentConfig& cfg) {
    validate(cfg);
    const NoiseSchedule schedule = build_linear_schedule(cfg.schedule);
    const std::shared_ptr<const ScoreModel> prior = build_prior(cfg.prior);
    const RandomStream root(cfg.seeds.front());
    const std::size_t n_est = cfg.compare.estimators.size();
    const std::size_t n_frac = cfg.compare.fractions.size();
    const std::size_t draws = cfg.compare.draws;
    if (draws == 0) throw ConfigError("compare.draws must be positive");

    // cos[f][e][d], recon[f][e][d]; filled in parallel, reduced in index order.
    std::vector<double> cos(n_frac * n_est * draws), recon(n_frac * n_est * draws);
    parallel_for(n_frac * draws, cfg.threads, [&](std::size_t task) {
        const std::size_t f = task / draws;
        const std::size_t d = task % draws;
        const auto i = static_cast<std::size_t>(std::llround(cfg.compare.fractions[f] * schedule.n_steps()));
        const RandomStream draw = root.substream("fraction", f).substream("draw", d);

        RandomStream truth_stream = draw.substream("truth", 0);
        const Tensor x0 = sample_prior(*prior, truth_stream);
        OperatorPtr op = make_operator(cfg.problem.op, x0.shape());
        RandomStream obs_stream = draw.substream("observation", 0);
        const InverseProblem problem = synthesize_observation(op, cfg.problem.noise, x0, obs_stream);
        RandomStream fwd_stream = draw.substream("forward", 0);
        const Tensor x = diffuse_sample(x0, i, schedule, fwd_stream);

        const Tensor exact = exact_guidance_score(*prior, problem, x, i, schedule);
        const Tensor base = scale(prior->epsilon(x, i, schedule), -1.0);
        for (std::size_t e = 0; e < n_est; ++e) {
            Tensor s_tilde;
            switch (cfg.compare.estimators[e]) {
                case EstimatorKind::dpg:
                    s_tilde = dpg_score(*prior, problem, x, i, schedule, cfg.guidance, draw.substream("estimator", 0))
                                  .s_tilde;
                    break;
                case EstimatorKind::dps: s_tilde = dps_score(*prior, problem, x, i, schedule); break;
                case EstimatorKind::oracle: s_tilde = exact; break;
            }
            const Tensor score = cfg.compare.estimators[e] == EstimatorKind::oracle
                                     ? base + s_tilde
                                     : rescale_and_combine(base, s_tilde, cfg.guidance);
            const Tensor next = ddpm_step_with_noise(x, score, i, schedule, Tensor(x.shape()));
            const Tensor mu_next = prior->tweedie_mean(next, i - 1, schedule);
            const std::size_t slot = (f * n_est + e) * draws + d;
            cos[slot] = direction_accuracy(s_tilde, exact);
            recon[slot] = norm2(problem.y - op->apply(mu_next));
        }
    });

    std::vector<CompareRow> rows;
    for (std::size_t e = 0; e < n_est; ++e) {
        for (std::size_t f = 0; f < n_frac; ++f) {
            double sc = 0.0, sr = 0.0;
            for (std::size_t d = 0; d < draws; ++d) {
                sc += cos[(f * n_est + e) * draws + d];
                sr += recon[(f * n_est + e) * draws + d];
            }
            const auto i = static_cast<std::size_t>(std::llround(cfg.compare.fractions[f] * schedule.n_steps()));
            rows.push_back({cfg.compare.estimators[e], cfg.compare.fractions[f], i, sc / draws, sr / draws, draws});
        }
    }
    return rows;
}

std::string compare_to_csv(const std::vector<CompareRow>& rows) {
    std::string out = "estimator,fraction,i,mean_cosine,mean_recon_l2,draws\n";
    for (const auto& r : rows) {
        out += to_string(r.estimator) + "," + format_double(r.fraction) + "," + std::to_string(r.i) + "," +
               format_double(r.mean_cosine) + "," + format_double(r.mean_recon_l2) + "," + std::to_string(r.draws) +
               "\n";
    }
    return out;
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg) {
    validate(cfg);
    auto axis = [](const auto& values, auto base) {
        using T = decltype(base);
        return values.empty() ? std::vector<T>{base} : std::vector<T>(values.begin(), values.end());
    };
    const auto n_mcs = axis(cfg.sweep.n_mc, cfg.guidance.n_mc);
    const auto norms = axis(cfg.sweep.guidance_norm, cfg.guidance.guidance_norm);
    const auto sigmas = axis(cfg.sweep.sigma_y, cfg.problem.noise.sigma_y);

    std::vector<SweepRow> rows;
    for (std::size_t n : n_mcs) {
        for (double b : norms) {
            for (double s : sigmas) {
                ExperimentConfig point = cfg;
                point.guidance.n_mc = n;
                point.guidance.guidance_norm = b;
                point.problem.noise.sigma_y = s;
                point.write_artifacts = false;
                rows.push_back({n, b, s, evaluate_experiment(point)});
            }
        }
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "n_mc,guidance_norm,sigma_y,ok_seeds,psnr_mean,mse_mean,recon_loss_mean,tv_distance\n";
    for (const auto& r : rows) {
        const auto& rep = r.report;
        out += std::to_string(r.n_mc) + "," + format_double(r.guidance_norm) + "," + format_double(r.sigma_y) + "," +
               std::to_string(rep.seeds.size() - rep.failed) + "," + format_double(rep.psnr.mean) + "," +
               format_double(rep.mse.mean) + "," + format_double(rep.recon_loss.mean) + "," +
               (rep.tv_distance ? format_double(*rep.tv_distance) : std::string()) + "\n";
    }
    return out;
}

ProblemInstance make_problem_files(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out_dir) {
    validate(cfg);
    const std::shared_ptr<const ScoreModel> prior = build_prior(cfg.prior);
    ProblemInstance inst = build_problem(cfg, *prior, seed);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_tensor_files(dir, "truth", inst.truth);
    write_tensor_files(dir, "y", inst.problem.y);
    json meta = {
        {"seed", seed},
        {"x_shape", inst.problem.x_shape},
        {"y_shape", inst.problem.y.shape()},
        {"operator", to_string(inst.problem.op->kind())},
        {"linear", inst.problem.op->is_linear()},
        {"noise", to_string(inst.problem.noise.kind)},
        {"clipped_count", inst.problem.clipped_count},
        {"problem", config_to_json(cfg)["problem"]},
    };
    if (inst.truth_atom) meta["truth_atom"] = *inst.truth_atom;
    write_text_file(dir / "problem.json", meta.dump(2) + "\n");
    return inst;
}

}  // namespace dpg
