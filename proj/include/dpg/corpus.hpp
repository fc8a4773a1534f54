// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dpg/tensor.hpp"

namespace dpg {

inline constexpr std::size_t kToyCorpusSize = 32;
inline constexpr std::size_t kToyImageSide = 16;

/// Built-in benchmark set: 32 deterministic 16x16 single-channel images in
/// [0, 1] (stripes, checkerboards, disks, ramps), shape [1, 16, 16].
std::vector<Tensor> toy_corpus();

/// Image `index` of the corpus.
Tensor toy_image(std::size_t index);

}  // namespace dpg
