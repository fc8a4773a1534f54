// Copyright 2026 The DPG Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dpg {
namespace {

constexpr char kMagic[4] = {'D', 'P', 'G', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint64_t take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw FormatError("DPGT: truncated input");
        std::uint64_t v = 0;
        for (std::size_t b = 0; b < n; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
        pos_ += n;
        return v;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_dpgt(const Tensor& tensor) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : tensor.values()) put_f64(out, v);
    return out;
}

Tensor decode_dpgt(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("DPGT: bad magic");
    Reader reader(bytes);
    reader.take(4);
    const auto rank = static_cast<std::size_t>(reader.take(4));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(reader.take(4));
    const std::size_t n = shape_numel(shape);
    if (reader.remaining() != n * 8) {
        throw FormatError("DPGT: payload holds " + std::to_string(reader.remaining()) + " bytes, expected " +
                          std::to_string(n * 8));
    }
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(reader.take(8));
    return Tensor(std::move(shape), std::move(data));
}

void write_dpgt(const std::filesystem::path& path, const Tensor& tensor) {
    const auto bytes = encode_dpgt(tensor);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_dpgt(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_dpgt(bytes);
}

std::string encode_netpbm(const Tensor& image) {
    if (image.rank() != 3 || (image.channels() != 1 && image.channels() != 3)) {
        throw ShapeError("netpbm export needs a [1,H,W] or [3,H,W] image, got " + shape_to_string(image.shape()));
    }
    const std::size_t c = image.channels();
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = std::clamp(image.at(ch, y, x), 0.0, 1.0);
                out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
            }
        }
    }
    return out;
}

void write_netpbm(const std::filesystem::path& path, const Tensor& image) {
    const std::string bytes = encode_netpbm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace dpg
