// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpg {

std::string to_string(RescaleConvention v) {
    return v == RescaleConvention::unit_norm ? "unit_norm" : "literal_sq_norm";
}

std::string to_string(ZMode v) { return v == ZMode::sum ? "sum" : "per_pixel"; }

std::string to_string(EstimatorKind v) {
    switch (v) {
        case EstimatorKind::dpg: return "dpg";
        case EstimatorKind::dps: return "dps";
        case EstimatorKind::oracle: return "oracle";
    }
    return "unknown";
}

RescaleConvention rescale_from_string(const std::string& s) {
    if (s == "unit_norm") return RescaleConvention::unit_norm;
    if (s == "literal_sq_norm") return RescaleConvention::literal_sq_norm;
    throw std::invalid_argument("unknown rescale convention '" + s + "'");
}

ZMode z_mode_from_string(const std::string& s) {
    if (s == "sum") return ZMode::sum;
    if (s == "per_pixel") return ZMode::per_pixel;
    throw std::invalid_argument("unknown z_mode '" + s + "'");
}

EstimatorKind estimator_from_string(const std::string& s) {
    if (s == "dpg") return EstimatorKind::dpg;
    if (s == "dps") return EstimatorKind::dps;
    if (s == "oracle") return EstimatorKind::oracle;
    throw std::invalid_argument("unknown estimator '" + s + "'");
}

void validate(const GuidanceConfig& cfg) {
    if (cfg.estimator == EstimatorKind::dpg && cfg.n_mc < 2) {
        throw std::invalid_argument("n_mc must be >= 2 for the dpg estimator");
    }
    if (!(cfg.guidance_norm >= 0.0)) throw std::invalid_argument("guidance_norm must be non-negative");
    if (!(cfg.r_floor > 0.0)) throw std::invalid_argument("r_floor must be positive");
    if (cfg.forced_r && !(*cfg.forced_r > 0.0)) throw std::invalid_argument("forced_r must be positive");
}

double residual_std(const InverseProblem& problem, const Tensor& mu, double r_floor) {
    const Tensor residual = problem.y - problem.op->apply(mu);
    const double r = std::sqrt(norm2_squared(residual) / static_cast<double>(mu.size()));
    return std::max(r_floor, r);
}

double adaptive_z(const InverseProblem& problem, const Tensor& mu, ZMode mode, double r_floor) {
    const Tensor ax = problem.op->apply(mu);
    double z = 0.0;
    if (mode == ZMode::sum) {
        z = recon_loss(problem.noise, problem.y, ax);
    } else if (problem.noise.kind == NoiseKind::gaussian) {
        const double r = residual_std(problem, mu, r_floor);
        z = r * r;
    } else {
        z = norm1(problem.y - ax) / static_cast<double>(mu.size());
    }
    return std::max(z, r_floor * r_floor);
}

std::vector<double> costs_from_losses(const std::vector<double>& losses, double z) {
    if (losses.empty()) return {};
    if (!(z > 0.0)) throw std::invalid_argument("Z must be positive");
    const double lo = *std::min_element(losses.begin(), losses.end());
    std::vector<double> costs(losses.size());
    for (std::size_t m = 0; m < losses.size(); ++m) {
        const double c = std::exp(-(losses[m] - lo) / z);
        if (!std::isfinite(c)) {
            throw GuidanceError("non-finite cost at sample " + std::to_string(m) + " (loss " +
                                std::to_string(losses[m]) + ")");
        }
        costs[m] = std::max(c, std::numeric_limits<double>::min());
    }
    return costs;
}

std::vector<double> conditional_weights(const InverseProblem& problem, const std::vector<Tensor>& samples, double z) {
    std::vector<double> losses;
    losses.reserve(samples.size());
    for (const auto& s : samples) losses.push_back(recon_loss(problem.noise, problem.y, problem.op->apply(s)));
    return costs_from_losses(losses, z);
}

std::vector<double> loo_baselines(const std::vector<double>& costs) {
    const std::size_t n = costs.size();
    if (n < 2) throw std::invalid_argument("leave-one-out baselines need at least two samples");
    double total = 0.0;
    for (double c : costs) total += c;
    std::vector<double> b(n);
    for (std::size_t m = 0; m < n; ++m) b[m] = (total - costs[m]) / static_cast<double>(n - 1);
    return b;
}

DpgResult dpg_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x, std::size_t i,
                    const NoiseSchedule& schedule, const GuidanceConfig& cfg, const RandomStream& stream) {
    if (cfg.n_mc < 2) throw std::invalid_argument("dpg_score needs n_mc >= 2");
    DpgResult result;
    GuidanceStepState& st = result.state;
    st.mu = model.tweedie_mean(x, i, schedule);
    st.r = cfg.forced_r ? *cfg.forced_r : residual_std(problem, st.mu, cfg.r_floor);
    st.z = adaptive_z(problem, st.mu, cfg.z_mode, cfg.r_floor);

    const RandomStream step_stream = stream.substream("dpg", i);
    const std::size_t d = x.size();
    std::vector<double> xi(cfg.n_mc * d);
    st.losses.resize(cfg.n_mc);
    Tensor sample(x.shape());
    Tensor image(problem.op->output_shape());
    for (std::size_t m = 0; m < cfg.n_mc; ++m) {
        RandomStream sample_stream = step_stream.substream("mc", m);
        double* noise = xi.data() + m * d;
        for (std::size_t j = 0; j < d; ++j) {
            noise[j] = sample_stream.normal();
            sample[j] = st.mu[j] + st.r * noise[j];
        }
        problem.op->apply_into(sample, image);
        st.losses[m] = recon_loss(problem.noise, problem.y, image);
    }
    st.costs = costs_from_losses(st.losses, st.z);
    st.baselines = cfg.loo_baseline ? loo_baselines(st.costs) : std::vector<double>(cfg.n_mc, 0.0);

    // Aggregated form of -(1/(2 r^2 N)) sum_m (c_m - b_m) grad |x0^(m) - mu|^2,
    // using grad |x0^(m) - mu|^2 = -2 r J^T xi_m.
    Tensor weighted(x.shape());
    for (std::size_t m = 0; m < cfg.n_mc; ++m) {
        const double w = st.costs[m] - st.baselines[m];
        const double* noise = xi.data() + m * d;
        for (std::size_t j = 0; j < d; ++j) weighted[j] += w * noise[j];
    }
    result.s_tilde = model.tweedie_vjp(x, i, schedule, weighted);
    result.s_tilde *= 1.0 / (st.r * static_cast<double>(cfg.n_mc));
    st.s_tilde = result.s_tilde;
    return result;
}

Tensor dps_score(const ScoreModel& model, const InverseProblem& problem, const Tensor& x, std::size_t i,
                 const NoiseSchedule& schedule) {
    const Tensor mu = model.tweedie_mean(x, i, schedule);
    const Tensor dl = recon_loss_gradient(problem.noise, problem.y, problem.op->apply(mu));
    Tensor g = model.tweedie_vjp(x, i, schedule, problem.op->vjp(mu, dl));
    g *= -1.0;
    return g;
}

Tensor rescale_and_combine(const Tensor& base, const Tensor& s_tilde, const GuidanceConfig& cfg) {
    require_same_shape(base, s_tilde, "rescale_and_combine");
    const double n2 = norm2_squared(s_tilde);
    if (n2 == 0.0) return base;
    const double denom = cfg.rescale == RescaleConvention::unit_norm ? std::sqrt(n2) : n2;
    Tensor out = base;
    out.axpy(cfg.guidance_norm / denom, s_tilde);
    return out;
}

}  // namespace dpg
