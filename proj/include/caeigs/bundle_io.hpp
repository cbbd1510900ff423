#pragma once
// Versioned binary container for one zone's classifier.
//
// Layout (little-endian):
//   "CAEW"  magic
//   u32     version (1)
//   u32     CRC-32 of everything after this field
//   u32     zone id
//   u8      layout tag (0 frames-as-channels, 1 features-as-channels)
//   f64     leaky slope
//   f64     decision threshold
//   7 x (f64 mean, f64 std)
//   u32     layer count
//   per layer: u32 in, u32 out, u32 kernel, f64 weights[out*in*kernel], f64 bias[out]

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "caeigs/cnn.hpp"
#include "caeigs/error.hpp"

namespace caeigs {

inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::array<std::uint8_t, 4> kBundleMagic = {'C', 'A', 'E', 'W'};

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw Error(Errc::shape_mismatch, "weight payload ends before the declared shapes");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> save_weights(const WeightBundle& bundle) {
    check_bundle(bundle);
    detail::ByteWriter payload;
    payload.u32(static_cast<std::uint32_t>(bundle.zone_id));
    payload.u8(static_cast<std::uint8_t>(bundle.layout));
    payload.f64(bundle.net.leaky_slope);
    payload.f64(bundle.threshold);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        payload.f64(bundle.normalization.mean[f]);
        payload.f64(bundle.normalization.std[f]);
    }
    payload.u32(static_cast<std::uint32_t>(bundle.net.layers.size()));
    for (const auto& l : bundle.net.layers) {
        payload.u32(static_cast<std::uint32_t>(l.in_channels));
        payload.u32(static_cast<std::uint32_t>(l.out_channels));
        payload.u32(static_cast<std::uint32_t>(l.kernel_size));
        for (const double w : l.weights) payload.f64(w);
        for (const double b : l.bias) payload.f64(b);
    }
    detail::ByteWriter out;
    for (const auto c : kBundleMagic) out.u8(c);
    out.u32(kBundleVersion);
    out.u32(detail::crc32_of(payload.bytes()));
    auto& bytes = out.bytes();
    bytes.insert(bytes.end(), payload.bytes().begin(), payload.bytes().end());
    return std::move(bytes);
}

inline WeightBundle load_weights(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || !std::equal(kBundleMagic.begin(), kBundleMagic.end(), bytes.begin())) {
        throw Error(Errc::corrupt_payload, "not a weight bundle (bad magic)");
    }
    detail::ByteReader header(bytes.subspan(4, 8));
    const std::uint32_t version = header.u32();
    if (version != kBundleVersion) {
        throw Error(Errc::unsupported_version, "weight bundle version " + std::to_string(version) + " is not supported");
    }
    const std::uint32_t expected_crc = header.u32();
    const auto payload = bytes.subspan(12);
    detail::ByteReader r(payload);

    WeightBundle b;
    b.zone_id = static_cast<int>(r.u32());
    const std::uint8_t layout = r.u8();
    if (layout > 1) throw Error(Errc::corrupt_payload, "unknown layout tag " + std::to_string(layout));
    b.layout = static_cast<Layout>(layout);
    b.net.leaky_slope = r.f64();
    b.threshold = r.f64();
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        b.normalization.mean[f] = r.f64();
        b.normalization.std[f] = r.f64();
    }
    const std::uint32_t n_layers = r.u32();
    if (n_layers == 0 || n_layers > 64) throw Error(Errc::shape_mismatch, "implausible layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        ConvLayer l;
        l.in_channels = r.u32();
        l.out_channels = r.u32();
        l.kernel_size = r.u32();
        const std::uint64_t n_w = static_cast<std::uint64_t>(l.in_channels) * l.out_channels * l.kernel_size;
        if ((n_w + l.out_channels) * 8 > r.remaining()) {
            throw Error(Errc::shape_mismatch, "layer " + std::to_string(i) + " is truncated");
        }
        l.weights.resize(n_w);
        for (double& w : l.weights) w = r.f64();
        l.bias.resize(l.out_channels);
        for (double& v : l.bias) v = r.f64();
        b.net.layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw Error(Errc::corrupt_payload, "trailing bytes after the last layer");
    if (detail::crc32_of(payload) != expected_crc) throw Error(Errc::corrupt_payload, "checksum mismatch");
    check_bundle(b);
    return b;
}

inline void save_weights_file(const std::string& path, const WeightBundle& bundle) {
    const auto bytes = save_weights(bundle);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io, "short write to " + path);
}

inline WeightBundle load_weights_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_weights(bytes);
}

}  // namespace caeigs
