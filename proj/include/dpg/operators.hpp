// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpg/conv.hpp"
#include "dpg/random.hpp"
#include "dpg/tensor.hpp"

namespace dpg {

class NotLinearError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class OperatorKind { identity, inpaint, avgpool, gaussian_blur, motion_blur, nonlinear_blur, phase_retrieval };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

/// Serializable description of a degradation operator. Only the fields that
/// belong to `kind` are read.
struct OperatorSpec {
    OperatorKind kind = OperatorKind::identity;
    // inpaint: explicit kept indices, or a random subset of size
    // floor(keep_fraction * numel) drawn from `seed`.
    std::vector<std::size_t> keep;
    double keep_fraction = 0.5;
    // avgpool
    std::size_t factor = 2;
    // blurs
    std::size_t kernel_size = 7;
    double blur_std = 1.5;
    // motion blur; the angle is drawn from `seed` when unset
    std::size_t motion_length = 9;
    std::optional<double> angle_deg;
    // nonlinear blur: N(x) = B(x) + gain * B(x)^2
    double gain = 0.5;
    std::uint64_t seed = 0;

    friend bool operator==(const OperatorSpec&, const OperatorSpec&) = default;
};

/// Forward map A of y = A(x0) + n.
class DegradationOperator {
public:
    virtual ~DegradationOperator() = default;

    virtual OperatorKind kind() const = 0;
    virtual bool is_linear() const = 0;
    virtual Tensor apply(const Tensor& x) const = 0;
    /// apply() into a preallocated tensor of output_shape(); the default copies.
    virtual void apply_into(const Tensor& x, Tensor& out) const;
    /// Transpose of a linear operator; throws NotLinearError otherwise.
    virtual Tensor adjoint(const Tensor& v) const;
    /// v^T dA/dx at x. Linear operators return adjoint(v); the nonlinear ones
    /// shipped here override with closed forms.
    virtual Tensor vjp(const Tensor& x, const Tensor& v) const;

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return output_shape_; }

protected:
    DegradationOperator(Shape input, Shape output) : input_shape_(std::move(input)), output_shape_(std::move(output)) {}
    void check_input(const Tensor& x) const;
    void check_output(const Tensor& v) const;

private:
    Shape input_shape_;
    Shape output_shape_;
};

using OperatorPtr = std::shared_ptr<const DegradationOperator>;

OperatorPtr make_operator(const OperatorSpec& spec, const Shape& x_shape);

/// Central-difference VJP, h = 1e-4 * (1 + |x|_inf). Used as the fallback for
/// any operator without a closed-form derivative and as a test oracle.
Tensor operator_vjp_fd(const DegradationOperator& op, const Tensor& x, const Tensor& v);

Tensor gaussian_kernel(std::size_t size, double std_dev);
/// Anti-aliased line of `length` pixels at `angle_deg`, centred in a
/// size x size kernel, normalised to sum to one.
Tensor motion_kernel(std::size_t size, std::size_t length, double angle_deg);
/// Sorted coordinates kept by an inpainting mask.
std::vector<std::size_t> random_keep_indices(std::size_t numel, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Noise

enum class NoiseKind { gaussian, poisson };

struct NoiseModel {
    NoiseKind kind = NoiseKind::gaussian;
    double sigma_y = 0.05;
    double lambda = 1.0;
    double intensity_scale = 255.0;

    friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);
void validate(const NoiseModel& noise);

/// l_y: squared L2 residual for Gaussian noise, L1 residual for Poisson.
double recon_loss(const NoiseModel& noise, const Tensor& y, const Tensor& ax0);
/// d l_y / d(A x0). Poisson uses the sign subgradient (zero at zero).
Tensor recon_loss_gradient(const NoiseModel& noise, const Tensor& y, const Tensor& ax0);

struct InverseProblem {
    OperatorPtr op;
    NoiseModel noise;
    Tensor y;
    Shape x_shape;
    /// Entries of A(x0) clipped to zero before Poisson sampling.
    std::size_t clipped_count = 0;
};

/// y = A(x0) + sigma_y z, or y = Poisson(lambda s max(A x0, 0)) / (lambda s).
InverseProblem synthesize_observation(OperatorPtr op, const NoiseModel& noise, const Tensor& x0,
                                      RandomStream& stream);

}  // namespace dpg
