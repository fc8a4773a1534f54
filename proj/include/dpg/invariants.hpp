// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace dpg {

struct InvariantResult {
    std::string group;  // adjoint, tweedie, vjp, baseline, schedule, decomposition, roundtrip, oracle_fd
    std::string name;
    double value = 0.0;  // measured error (or violation count)
    double tolerance = 0.0;
    bool pass = false;
};

/// Closed-form self-checks over randomly drawn states: adjoint dot products,
/// Tweedie/score consistency, analytic VJPs against central differences,
/// zero-sum baselines, schedule monotonicity, the conditional = marginal +
/// guidance identity, and config/tensor round trips.
std::vector<InvariantResult> run_invariant_suite(std::uint64_t seed);

nlohmann::json invariants_to_json(const std::vector<InvariantResult>& results);

}  // namespace dpg
