// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpg/tensor.hpp"

namespace dpg {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// DPGT layout: "DPGT", u32 rank, rank x u32 dims, then prod(dims) f64.
// All integers and floats are little-endian.
std::vector<std::uint8_t> encode_dpgt(const Tensor& tensor);
Tensor decode_dpgt(const std::vector<std::uint8_t>& bytes);

void write_dpgt(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_dpgt(const std::filesystem::path& path);

/// Binary PGM (P5) for [1,H,W] or PPM (P6) for [3,H,W]; values in [0,1] map
/// linearly to [0,255], anything outside is clamped.
std::string encode_netpbm(const Tensor& image);
void write_netpbm(const std::filesystem::path& path, const Tensor& image);

}  // namespace dpg
