// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dpg/dft.hpp"

namespace dpg {
namespace {

Shape require_image(const Shape& shape, const char* what) {
    if (shape.size() != 3) throw ShapeError(std::string(what) + " needs a [C,H,W] input, got " + shape_to_string(shape));
    return shape;
}

class IdentityOperator final : public DegradationOperator {
public:
    explicit IdentityOperator(const Shape& shape) : DegradationOperator(shape, shape) {}
    OperatorKind kind() const override { return OperatorKind::identity; }
    bool is_linear() const override { return true; }
    Tensor apply(const Tensor& x) const override {
        check_input(x);
        return x;
    }
    void apply_into(const Tensor& x, Tensor& out) const override {
        check_input(x);
        check_output(out);
        std::copy(x.values().begin(), x.values().end(), out.values().begin());
    }
    Tensor adjoint(const Tensor& v) const override {
        check_output(v);
        return v;
    }
};

class InpaintOperator final : public DegradationOperator {
public:
    InpaintOperator(const Shape& shape, std::vector<std::size_t> keep)
        : DegradationOperator(shape, Shape{keep.size()}), keep_(std::move(keep)) {
        const std::size_t n = shape_numel(shape);
        for (std::size_t k : keep_) {
            if (k >= n) throw std::invalid_argument("inpaint index " + std::to_string(k) + " out of range");
        }
    }
    OperatorKind kind() const override { return OperatorKind::inpaint; }
    bool is_linear() const override { return true; }
    Tensor apply(const Tensor& x) const override {
        check_input(x);
        Tensor out(output_shape());
        for (std::size_t k = 0; k < keep_.size(); ++k) out[k] = x[keep_[k]];
        return out;
    }
    void apply_into(const Tensor& x, Tensor& out) const override {
        check_input(x);
        check_output(out);
        for (std::size_t k = 0; k < keep_.size(); ++k) out[k] = x[keep_[k]];
    }
    Tensor adjoint(const Tensor& v) const override {
        check_output(v);
        Tensor out(input_shape());
        for (std::size_t k = 0; k < keep_.size(); ++k) out[keep_[k]] += v[k];
        return out;
    }

private:
    std::vector<std::size_t> keep_;
};

class AvgPoolOperator final : public DegradationOperator {
public:
    AvgPoolOperator(const Shape& shape, std::size_t factor)
        : DegradationOperator(require_image(shape, "avgpool"), pooled(shape, factor)), factor_(factor) {}

    OperatorKind kind() const override { return OperatorKind::avgpool; }
    bool is_linear() const override { return true; }

    Tensor apply(const Tensor& x) const override {
        check_input(x);
        Tensor out(output_shape());
        const double inv = 1.0 / static_cast<double>(factor_ * factor_);
        for_each_cell([&](std::size_t o, std::size_t i) { out[o] += inv * x[i]; });
        return out;
    }

    Tensor adjoint(const Tensor& v) const override {
        check_output(v);
        Tensor out(input_shape());
        const double inv = 1.0 / static_cast<double>(factor_ * factor_);
        for_each_cell([&](std::size_t o, std::size_t i) { out[i] += inv * v[o]; });
        return out;
    }

private:
    static Shape pooled(const Shape& shape, std::size_t factor) {
        if (factor == 0 || shape[1] % factor != 0 || shape[2] % factor != 0) {
            throw std::invalid_argument("avgpool factor " + std::to_string(factor) + " must divide " +
                                        shape_to_string(shape));
        }
        return Shape{shape[0], shape[1] / factor, shape[2] / factor};
    }

    template <typename Fn>
    void for_each_cell(Fn&& fn) const {
        const auto& in = input_shape();
        const auto& out = output_shape();
        for (std::size_t c = 0; c < in[0]; ++c)
            for (std::size_t y = 0; y < in[1]; ++y)
                for (std::size_t x = 0; x < in[2]; ++x)
                    fn((c * out[1] + y / factor_) * out[2] + x / factor_, (c * in[1] + y) * in[2] + x);
    }

    std::size_t factor_;
};

class BlurOperator final : public DegradationOperator {
public:
    BlurOperator(const Shape& shape, OperatorKind kind, Tensor kernel)
        : DegradationOperator(require_image(shape, "blur"), shape),
          kind_(kind),
          plan_(shape[1], shape[2], std::move(kernel), Boundary::reflect) {}
    OperatorKind kind() const override { return kind_; }
    bool is_linear() const override { return true; }
    Tensor apply(const Tensor& x) const override {
        check_input(x);
        return plan_.apply(x);
    }
    Tensor adjoint(const Tensor& v) const override {
        check_output(v);
        return plan_.adjoint(v);
    }

private:
    OperatorKind kind_;
    Conv2dPlan plan_;
};

// Deterministic stand-in for a learned nonlinear blur: B(x) + gain * B(x)^2.
class NonlinearBlurOperator final : public DegradationOperator {
public:
    NonlinearBlurOperator(const Shape& shape, Tensor kernel, double gain)
        : DegradationOperator(require_image(shape, "nonlinear_blur"), shape),
          plan_(shape[1], shape[2], std::move(kernel), Boundary::reflect),
          gain_(gain) {}
    OperatorKind kind() const override { return OperatorKind::nonlinear_blur; }
    bool is_linear() const override { return false; }
    Tensor apply(const Tensor& x) const override {
        check_input(x);
        Tensor b = plan_.apply(x);
        for (double& v : b.values()) v += gain_ * v * v;
        return b;
    }
    Tensor vjp(const Tensor& x, const Tensor& v) const override {
        check_input(x);
        check_output(v);
        const Tensor b = plan_.apply(x);
        Tensor w = v;
        for (std::size_t k = 0; k < w.size(); ++k) w[k] *= 1.0 + 2.0 * gain_ * b[k];
        return plan_.adjoint(w);
    }

private:
    Conv2dPlan plan_;
    double gain_;
};

class PhaseRetrievalOperator final : public DegradationOperator {
public:
    explicit PhaseRetrievalOperator(const Shape& shape) : DegradationOperator(check(shape), shape) {}
    OperatorKind kind() const override { return OperatorKind::phase_retrieval; }
    bool is_linear() const override { return false; }
    Tensor apply(const Tensor& x) const override {
        check_input(x);
        return dft2_magnitude(x);
    }
    // d|X_k|/dx = Re(conj(X_k) F_k) / |X_k|, so v^T J = Re(F^H (v * X / |X|)).
    // Frequencies with |X_k| = 0 contribute the zero subgradient.
    Tensor vjp(const Tensor& x, const Tensor& v) const override {
        check_input(x);
        check_output(v);
        const std::size_t h = x.height();
        const std::size_t w = x.width();
        ComplexPlane spectrum = dft2(ComplexPlane(x.values().begin(), x.values().end()), h, w);
        for (std::size_t k = 0; k < spectrum.size(); ++k) {
            const double mag = std::abs(spectrum[k]);
            spectrum[k] = mag > 0.0 ? spectrum[k] * (v[k] / mag) : std::complex<double>{};
        }
        const ComplexPlane back = dft2_adjoint(spectrum, h, w);
        Tensor out(x.shape());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = back[k].real();
        return out;
    }

private:
    static Shape check(const Shape& shape) {
        if (shape.size() != 3 || shape[0] != 1) {
            throw ShapeError("phase_retrieval needs a [1,H,W] input, got " + shape_to_string(shape));
        }
        return shape;
    }
};

}  // namespace

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::identity: return "identity";
        case OperatorKind::inpaint: return "inpaint";
        case OperatorKind::avgpool: return "avgpool";
        case OperatorKind::gaussian_blur: return "gaussian_blur";
        case OperatorKind::motion_blur: return "motion_blur";
        case OperatorKind::nonlinear_blur: return "nonlinear_blur";
        case OperatorKind::phase_retrieval: return "phase_retrieval";
    }
    return "unknown";
}

OperatorKind operator_kind_from_string(const std::string& name) {
    for (auto kind : {OperatorKind::identity, OperatorKind::inpaint, OperatorKind::avgpool, OperatorKind::gaussian_blur,
                      OperatorKind::motion_blur, OperatorKind::nonlinear_blur, OperatorKind::phase_retrieval}) {
        if (to_string(kind) == name) return kind;
    }
    throw std::invalid_argument("unknown operator kind '" + name + "'");
}

void DegradationOperator::apply_into(const Tensor& x, Tensor& out) const {
    Tensor result = apply(x);
    check_output(result);
    require_same_shape(out, result, "apply_into");
    out = std::move(result);
}

Tensor DegradationOperator::adjoint(const Tensor&) const {
    throw NotLinearError("adjoint requested for nonlinear operator " + to_string(kind()));
}

Tensor DegradationOperator::vjp(const Tensor& x, const Tensor& v) const {
    if (is_linear()) {
        check_input(x);
        return adjoint(v);
    }
    return operator_vjp_fd(*this, x, v);
}

void DegradationOperator::check_input(const Tensor& x) const {
    if (x.shape() != input_shape_) {
        throw ShapeError(to_string(kind()) + ": input shape " + shape_to_string(x.shape()) + ", expected " +
                         shape_to_string(input_shape_));
    }
}

void DegradationOperator::check_output(const Tensor& v) const {
    if (v.shape() != output_shape_) {
        throw ShapeError(to_string(kind()) + ": output-space shape " + shape_to_string(v.shape()) + ", expected " +
                         shape_to_string(output_shape_));
    }
}

Tensor operator_vjp_fd(const DegradationOperator& op, const Tensor& x, const Tensor& v) {
    const double h = 1e-4 * (1.0 + norm_inf(x));
    Tensor out(x.shape());
    Tensor probe = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        probe[j] = x[j] + h;
        const double up = dot(v, op.apply(probe));
        probe[j] = x[j] - h;
        const double down = dot(v, op.apply(probe));
        probe[j] = x[j];
        out[j] = (up - down) / (2.0 * h);
    }
    return out;
}

Tensor gaussian_kernel(std::size_t size, double std_dev) {
    if (size % 2 == 0) throw std::invalid_argument("kernel size must be odd");
    if (!(std_dev > 0.0)) throw std::invalid_argument("blur std must be positive");
    Tensor k(Shape{size, size});
    const double c = static_cast<double>(size / 2);
    double total = 0.0;
    for (std::size_t u = 0; u < size; ++u) {
        for (std::size_t v = 0; v < size; ++v) {
            const double dy = static_cast<double>(u) - c;
            const double dx = static_cast<double>(v) - c;
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * std_dev * std_dev));
            k[u * size + v] = w;
            total += w;
        }
    }
    k *= 1.0 / total;
    return k;
}

Tensor motion_kernel(std::size_t size, std::size_t length, double angle_deg) {
    if (size % 2 == 0) throw std::invalid_argument("kernel size must be odd");
    if (length == 0 || length > size) throw std::invalid_argument("motion length must be in 1..kernel size");
    Tensor k(Shape{size, size});
    const double c = static_cast<double>(size / 2);
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double half = 0.5 * static_cast<double>(length - 1);
    const std::size_t samples = 8 * length + 1;
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = samples == 1 ? 0.0 : -half + 2.0 * half * static_cast<double>(s) / static_cast<double>(samples - 1);
        const double px = c + t * std::cos(theta);
        const double py = c - t * std::sin(theta);
        const double fx = std::floor(px);
        const double fy = std::floor(py);
        const double ax = px - fx;
        const double ay = py - fy;
        // bilinear splat
        const double taps[4][3] = {{fy, fx, (1 - ay) * (1 - ax)}, {fy, fx + 1, (1 - ay) * ax},
                                   {fy + 1, fx, ay * (1 - ax)}, {fy + 1, fx + 1, ay * ax}};
        for (const auto& tap : taps) {
            if (tap[2] <= 0.0 || tap[0] < 0 || tap[1] < 0 || tap[0] >= static_cast<double>(size) ||
                tap[1] >= static_cast<double>(size)) {
                continue;
            }
            k[static_cast<std::size_t>(tap[0]) * size + static_cast<std::size_t>(tap[1])] += tap[2];
        }
    }
    k *= 1.0 / sum(k);
    return k;
}

std::vector<std::size_t> random_keep_indices(std::size_t numel, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("keep_fraction must lie in (0,1]");
    const auto n_keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(numel))));
    std::vector<std::size_t> idx(numel);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    RandomStream stream = RandomStream(seed).substream("inpaint_mask", 0);
    for (std::size_t k = 0; k < n_keep; ++k) {
        const auto span = static_cast<double>(numel - k);
        const std::size_t pick = k + std::min(numel - k - 1, static_cast<std::size_t>(stream.uniform() * span));
        std::swap(idx[k], idx[pick]);
    }
    idx.resize(n_keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

OperatorPtr make_operator(const OperatorSpec& spec, const Shape& x_shape) {
    switch (spec.kind) {
        case OperatorKind::identity: return std::make_shared<IdentityOperator>(x_shape);
        case OperatorKind::inpaint: {
            auto keep = spec.keep.empty() ? random_keep_indices(shape_numel(x_shape), spec.keep_fraction, spec.seed)
                                          : spec.keep;
            return std::make_shared<InpaintOperator>(x_shape, std::move(keep));
        }
        case OperatorKind::avgpool: return std::make_shared<AvgPoolOperator>(x_shape, spec.factor);
        case OperatorKind::gaussian_blur:
            return std::make_shared<BlurOperator>(x_shape, spec.kind, gaussian_kernel(spec.kernel_size, spec.blur_std));
        case OperatorKind::motion_blur: {
            const double angle =
                spec.angle_deg ? *spec.angle_deg : 180.0 * RandomStream(spec.seed).substream("motion_angle", 0).uniform();
            // The kernel grows to the smallest odd size holding the line.
            const std::size_t size = std::max(spec.kernel_size, spec.motion_length | 1);
            return std::make_shared<BlurOperator>(x_shape, spec.kind, motion_kernel(size, spec.motion_length, angle));
        }
        case OperatorKind::nonlinear_blur:
            return std::make_shared<NonlinearBlurOperator>(x_shape, gaussian_kernel(spec.kernel_size, spec.blur_std),
                                                           spec.gain);
        case OperatorKind::phase_retrieval: return std::make_shared<PhaseRetrievalOperator>(x_shape);
    }
    throw std::invalid_argument("unhandled operator kind");
}

// ---------------------------------------------------------------------------
// Noise

std::string to_string(NoiseKind kind) { return kind == NoiseKind::gaussian ? "gaussian" : "poisson"; }

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "gaussian") return NoiseKind::gaussian;
    if (name == "poisson") return NoiseKind::poisson;
    throw std::invalid_argument("unknown noise kind '" + name + "'");
}

void validate(const NoiseModel& noise) {
    if (noise.kind == NoiseKind::gaussian && !(noise.sigma_y > 0.0)) {
        throw std::invalid_argument("sigma_y must be positive");
    }
    if (noise.kind == NoiseKind::poisson && !(noise.lambda > 0.0 && noise.intensity_scale > 0.0)) {
        throw std::invalid_argument("poisson lambda and intensity scale must be positive");
    }
}

double recon_loss(const NoiseModel& noise, const Tensor& y, const Tensor& ax0) {
    require_same_shape(y, ax0, "recon_loss");
    double acc = 0.0;
    if (noise.kind == NoiseKind::gaussian) {
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double r = y[k] - ax0[k];
            acc += r * r;
        }
    } else {
        for (std::size_t k = 0; k < y.size(); ++k) acc += std::abs(y[k] - ax0[k]);
    }
    return acc;
}

Tensor recon_loss_gradient(const NoiseModel& noise, const Tensor& y, const Tensor& ax0) {
    require_same_shape(y, ax0, "recon_loss_gradient");
    Tensor g(y.shape());
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double r = y[k] - ax0[k];
        if (noise.kind == NoiseKind::gaussian) {
            g[k] = -2.0 * r;
        } else {
            g[k] = r > 0.0 ? -1.0 : (r < 0.0 ? 1.0 : 0.0);
        }
    }
    return g;
}

InverseProblem synthesize_observation(OperatorPtr op, const NoiseModel& noise, const Tensor& x0,
                                      RandomStream& stream) {
    validate(noise);
    InverseProblem problem;
    problem.noise = noise;
    problem.x_shape = x0.shape();
    Tensor clean = op->apply(x0);
    if (noise.kind == NoiseKind::gaussian) {
        problem.y = clean;
        problem.y.axpy(noise.sigma_y, draw_normal(stream, clean.shape()));
    } else {
        const double s = noise.lambda * noise.intensity_scale;
        Tensor rates(clean.shape());
        for (std::size_t k = 0; k < clean.size(); ++k) {
            if (clean[k] < 0.0) ++problem.clipped_count;
            rates[k] = s * std::max(clean[k], 0.0);
        }
        problem.y = scale(draw_poisson(stream, rates), 1.0 / s);
    }
    problem.op = std::move(op);
    return problem;
}

}  // namespace dpg
