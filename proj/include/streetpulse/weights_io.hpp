#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "streetpulse/nn.hpp"

namespace streetpulse {

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline void put_f32le(std::vector<std::uint8_t>& out, float v) {
  put_u32le(out, std::bit_cast<std::uint32_t>(v));
}

struct ByteReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  std::string what;  // prepended to error messages, e.g. "weights"

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw std::runtime_error(what + ": truncated payload");
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(bytes[pos]) |
                      (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  float f32le() { return std::bit_cast<float>(u32le()); }
  bool done() const { return pos == bytes.size(); }
};

}  // namespace detail

// "SPW1" container: magic, then the layer count as u32 LE, then per layer a
// kind tag byte, the shape extents as u32 LE, and the raw float32 payload in
// little-endian storage order (conv: kernels then bias; dense: weights then
// bias). Round trips are bit-exact.
inline std::vector<std::uint8_t> save_weights(const std::vector<LayerSpec>& spec,
                                              const ModelWeights& weights) {
  check_weights(spec, weights);
  std::vector<std::uint8_t> out;
  out.push_back('S');
  out.push_back('P');
  out.push_back('W');
  out.push_back('1');
  detail::put_u32le(out, static_cast<std::uint32_t>(spec.size()));
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const LayerSpec& ls = spec[l];
    out.push_back(static_cast<std::uint8_t>(ls.kind));
    if (ls.kind == LayerKind::conv2d) {
      detail::put_u32le(out, static_cast<std::uint32_t>(ls.out_channels));
      detail::put_u32le(out, static_cast<std::uint32_t>(ls.in_channels));
      detail::put_u32le(out, static_cast<std::uint32_t>(ls.kernel));
    } else if (ls.kind == LayerKind::dense) {
      detail::put_u32le(out, static_cast<std::uint32_t>(ls.out_units));
      detail::put_u32le(out, static_cast<std::uint32_t>(ls.in_units));
    }
    for (float v : weights[l].weights.data) detail::put_f32le(out, v);
    for (float v : weights[l].bias.data) detail::put_f32le(out, v);
  }
  return out;
}

inline std::pair<std::vector<LayerSpec>, ModelWeights> load_weights(
    std::span<const std::uint8_t> bytes) {
  detail::ByteReader r{bytes, 0, "weights"};
  r.need(4);
  if (bytes[0] != 'S' || bytes[1] != 'P' || bytes[2] != 'W') {
    throw std::runtime_error("weights: bad magic");
  }
  if (bytes[3] != '1') throw std::runtime_error("weights: unsupported version");
  r.pos = 4;

  const auto read_extent = [&]() -> int {
    const std::uint32_t v = r.u32le();
    if (v < 1 || v > 1'000'000) throw std::runtime_error("weights: shape inconsistency");
    return static_cast<int>(v);
  };

  const std::uint32_t count = r.u32le();
  if (count > 1024) throw std::runtime_error("weights: shape inconsistency");
  std::vector<LayerSpec> spec;
  ModelWeights weights;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint8_t tag = r.u8();
    LayerSpec ls;
    LayerWeights lw;
    switch (tag) {
      case static_cast<std::uint8_t>(LayerKind::conv2d): {
        const int out_ch = read_extent();
        const int in_ch = read_extent();
        const int k = read_extent();
        ls = LayerSpec::conv2d(in_ch, out_ch, k);
        const std::size_t n = static_cast<std::size_t>(out_ch) * in_ch * k * k;
        if (n > 100'000'000) throw std::runtime_error("weights: shape inconsistency");
        lw.weights = Tensor({out_ch, in_ch, k, k});
        lw.bias = Tensor({out_ch});
        break;
      }
      case static_cast<std::uint8_t>(LayerKind::dense): {
        const int out_units = read_extent();
        const int in_units = read_extent();
        ls = LayerSpec::dense(in_units, out_units);
        const std::size_t n = static_cast<std::size_t>(out_units) * in_units;
        if (n > 100'000'000) throw std::runtime_error("weights: shape inconsistency");
        lw.weights = Tensor({out_units, in_units});
        lw.bias = Tensor({out_units});
        break;
      }
      case static_cast<std::uint8_t>(LayerKind::relu):
        ls = LayerSpec::relu();
        break;
      case static_cast<std::uint8_t>(LayerKind::maxpool2):
        ls = LayerSpec::maxpool2();
        break;
      case static_cast<std::uint8_t>(LayerKind::flatten):
        ls = LayerSpec::flatten();
        break;
      case static_cast<std::uint8_t>(LayerKind::softmax):
        ls = LayerSpec::softmax();
        break;
      default:
        throw std::runtime_error("weights: unknown layer kind");
    }
    for (float& v : lw.weights.data) v = r.f32le();
    for (float& v : lw.bias.data) v = r.f32le();
    spec.push_back(ls);
    weights.push_back(std::move(lw));
  }
  if (!r.done()) throw std::runtime_error("weights: trailing bytes");
  return {std::move(spec), std::move(weights)};
}

}  // namespace streetpulse
