// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include "dpg/oracle.hpp"

namespace dpg {

std::string to_string(SolverKind kind) { return kind == SolverKind::ddpm ? "ddpm" : "ddim"; }

SolverKind solver_from_string(const std::string& name) {
    if (name == "ddpm") return SolverKind::ddpm;
    if (name == "ddim") return SolverKind::ddim;
    throw std::invalid_argument("unknown solver '" + name + "'");
}

Tensor ddpm_step_with_noise(const Tensor& x, const Tensor& score, std::size_t i, const NoiseSchedule& schedule,
                            const Tensor& z) {
    require_same_shape(x, score, "ddpm_step");
    const double a = schedule.alpha(i);
    Tensor out = scale(x, 1.0 / std::sqrt(a));
    out.axpy((1.0 - a) / schedule.sigma(i), score);
    if (i > 1) out.axpy(std::sqrt(schedule.beta(i)), z);
    return out;
}

Tensor ddpm_step(const Tensor& x, const Tensor& score, std::size_t i, const NoiseSchedule& schedule,
                 const RandomStream& stream) {
    if (i < 1 || i > schedule.n_steps()) throw std::out_of_range("ddpm_step: step " + std::to_string(i));
    if (i == 1) return ddpm_step_with_noise(x, score, i, schedule, Tensor(x.shape()));
    RandomStream noise_stream = stream.substream("ddpm", i);
    return ddpm_step_with_noise(x, score, i, schedule, draw_normal(noise_stream, x.shape()));
}

Tensor ddim_step(const Tensor& x, const Tensor& eps, std::size_t i, std::size_t i_prev, const NoiseSchedule& schedule) {
    if (!(i_prev < i && i <= schedule.n_steps())) {
        throw std::out_of_range("ddim_step: invalid step pair " + std::to_string(i) + " -> " + std::to_string(i_prev));
    }
    require_same_shape(x, eps, "ddim_step");
    const double ab = schedule.alpha_bar(i);
    const double ab_prev = schedule.alpha_bar(i_prev);
    Tensor out = scale(x, std::sqrt(ab_prev / ab));
    const double coef = std::sqrt(ab_prev) * (std::sqrt((1.0 - ab_prev) / ab_prev) - std::sqrt((1.0 - ab) / ab));
    out.axpy(coef, eps);
    return out;
}

std::vector<std::size_t> visited_steps(const SolverSpec& solver, std::size_t n_steps) {
    std::vector<std::size_t> steps;
    if (solver.kind == SolverKind::ddpm) {
        for (std::size_t i = n_steps + 1; i-- > 0;) steps.push_back(i);
        return steps;
    }
    if (solver.steps < 1 || solver.steps > n_steps) {
        throw std::invalid_argument("ddim step count must lie in 1..N");
    }
    for (std::size_t k = solver.steps + 1; k-- > 0;) {
        const auto i = static_cast<std::size_t>(
            std::llround(static_cast<double>(k) * static_cast<double>(n_steps) / static_cast<double>(solver.steps)));
        if (steps.empty() || steps.back() != i) steps.push_back(i);
    }
    return steps;
}

std::string trace_to_csv(const SamplerTrace& trace) {
    std::string out = "step,i,r_i,recon_l2,s_tilde_norm,cos_oracle\n";
    char buf[64];
    auto put = [&](double v) { out.append(buf, std::to_chars(buf, buf + sizeof buf, v).ptr); };
    for (const auto& rec : trace.records) {
        out += std::to_string(rec.step) + "," + std::to_string(rec.i) + ",";
        put(rec.r);
        out += ',';
        put(rec.recon_l2);
        out += ',';
        put(rec.s_tilde_norm);
        out += ',';
        if (rec.cos_oracle) put(*rec.cos_oracle);
        out += '\n';
    }
    return out;
}

SolveResult solve_inverse(const ScoreModel& model, const InverseProblem& problem, const GuidanceConfig& cfg,
                          const SolverSpec& solver, const NoiseSchedule& schedule, std::uint64_t seed,
                          const SolveOptions& options) {
    validate(cfg);
    const auto started = std::chrono::steady_clock::now();
    const RandomStream root(seed);
    const std::vector<std::size_t> steps = visited_steps(solver, schedule.n_steps());

    SolveResult result;
    Tensor x;
    if (options.initial_state) {
        x = *options.initial_state;
        require_same_shape(x, Tensor(problem.x_shape), "initial state");
    } else {
        RandomStream init = root.substream("init", 0);
        x = draw_normal(init, problem.x_shape);
    }

    const bool guided = cfg.estimator == EstimatorKind::oracle || cfg.guidance_norm > 0.0;
    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
        const std::size_t i = steps[k];
        const std::size_t i_prev = steps[k + 1];

        const Tensor eps = model.epsilon(x, i, schedule);
        const Tensor mu = model.tweedie_mean(x, i, schedule);

        TraceRecord rec;
        rec.step = k;
        const bool last = options.stop_at && *options.stop_at >= i;
        rec.i = i;
        rec.recon_l2 = norm2(problem.y - problem.op->apply(mu));
        rec.r = cfg.forced_r ? *cfg.forced_r : residual_std(problem, mu, cfg.r_floor);

        if (last) {
            rec.s_tilde_norm = 0.0;
            result.trace.records.push_back(rec);
            if (std::find(options.snapshot_steps.begin(), options.snapshot_steps.end(), i) !=
                options.snapshot_steps.end()) {
                result.snapshots.push_back({i, mu});
            }
            break;
        }

        std::optional<Tensor> exact;
        if (options.record_oracle_cosine || cfg.estimator == EstimatorKind::oracle) {
            exact = exact_guidance_score(model, problem, x, i, schedule);
        }

        Tensor s_tilde(x.shape());
        if (guided) {
            switch (cfg.estimator) {
                case EstimatorKind::dpg: s_tilde = dpg_score(model, problem, x, i, schedule, cfg, root).s_tilde; break;
                case EstimatorKind::dps: s_tilde = dps_score(model, problem, x, i, schedule); break;
                case EstimatorKind::oracle: s_tilde = *exact; break;
            }
        }
        rec.s_tilde_norm = norm2(s_tilde);
        if (options.record_oracle_cosine) rec.cos_oracle = direction_accuracy(s_tilde, *exact);

        const Tensor base = scale(eps, -1.0);
        const Tensor score = cfg.estimator == EstimatorKind::oracle ? base + s_tilde
                                                                     : rescale_and_combine(base, s_tilde, cfg);

        if (std::find(options.snapshot_steps.begin(), options.snapshot_steps.end(), i) != options.snapshot_steps.end()) {
            result.snapshots.push_back({i, mu});
        }

        if (solver.kind == SolverKind::ddpm) {
            x = ddpm_step(x, score, i, schedule, root);
        } else {
            x = ddim_step(x, scale(score, -1.0), i, i_prev, schedule);
        }
        result.trace.records.push_back(rec);
        if (!x.all_finite()) throw SamplerError("non-finite state after step " + std::to_string(i), i);
    }

    result.x0 = std::move(x);
    result.trace.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace dpg
