#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace streetpulse {

// 8-bit single-channel raster, row-major. The working currency of the
// pipeline: frames, pyramid levels and face crops are all GrayImage.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  bool operator==(const GrayImage&) const = default;
};

// 8-bit interleaved RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // r,g,b,r,g,b,...
  bool operator==(const RgbImage&) const = default;
};

using PnmImage = std::variant<GrayImage, RgbImage>;

namespace detail {

inline void check_gray(const GrayImage& img, const char* who) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw std::invalid_argument(std::string(who) + ": malformed GrayImage");
  }
}

inline void check_rgb(const RgbImage& img, const char* who) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw std::invalid_argument(std::string(who) + ": malformed RgbImage");
  }
}

// Token scanner for the PNM header: arbitrary whitespace between tokens,
// '#' starts a comment that runs to end of line.
class PnmScanner {
public:
  explicit PnmScanner(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string next_token() {
    skip_ws_and_comments();
    std::string tok;
    while (pos_ < bytes_.size() && !is_ws(bytes_[pos_]) && bytes_[pos_] != '#') {
      tok.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (tok.empty()) throw std::runtime_error("pnm: truncated header");
    return tok;
  }

  // Exactly one whitespace byte separates the maxval from the payload.
  std::span<const std::uint8_t> payload() {
    if (pos_ >= bytes_.size() || !is_ws(bytes_[pos_])) {
      throw std::runtime_error("pnm: missing separator before pixel data");
    }
    ++pos_;
    return bytes_.subspan(pos_);
  }

private:
  static bool is_ws(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
  }

  void skip_ws_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_ws(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline int parse_pnm_dimension(const std::string& tok) {
  if (tok.empty()) throw std::runtime_error("pnm: empty header field");
  long long value = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') throw std::runtime_error("pnm: non-numeric header field '" + tok + "'");
    value = value * 10 + (c - '0');
    if (value > 1'000'000) throw std::runtime_error("pnm: header dimension overflow");
  }
  if (value < 1) throw std::runtime_error("pnm: zero header dimension");
  return static_cast<int>(value);
}

}  // namespace detail

// Decodes a binary PGM ("P5") or PPM ("P6") with maxval 255.
inline PnmImage load_pnm(std::span<const std::uint8_t> bytes) {
  detail::PnmScanner scan(bytes);
  const std::string magic = scan.next_token();
  if (magic != "P5" && magic != "P6") {
    throw std::runtime_error("pnm: unsupported magic '" + magic + "'");
  }
  const int width = detail::parse_pnm_dimension(scan.next_token());
  const int height = detail::parse_pnm_dimension(scan.next_token());
  if (static_cast<long long>(width) * height > 100'000'000LL) {
    throw std::runtime_error("pnm: header dimension overflow");
  }
  const std::string maxval = scan.next_token();
  if (maxval != "255") {
    throw std::runtime_error("pnm: unsupported maxval '" + maxval + "'");
  }
  const auto payload = scan.payload();
  const std::size_t channels = (magic == "P5") ? 1 : 3;
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (payload.size() < need) throw std::runtime_error("pnm: truncated pixel payload");
  std::vector<std::uint8_t> pixels(payload.begin(), payload.begin() + need);
  if (magic == "P5") return GrayImage{width, height, std::move(pixels)};
  return RgbImage{width, height, std::move(pixels)};
}

// Emits exactly "P5\n{w} {h}\n255\n" followed by the raw pixel bytes, so
// load_pnm(save_pgm(x)) == x.
inline std::vector<std::uint8_t> save_pgm(const GrayImage& img) {
  detail::check_gray(img, "save_pgm");
  const std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out;
  out.reserve(header.size() + img.pixels.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), half away from zero.
inline GrayImage to_grayscale(const RgbImage& img) {
  detail::check_rgb(img, "to_grayscale");
  GrayImage out{img.width, img.height, {}};
  out.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double r = img.pixels[3 * i];
    const double g = img.pixels[3 * i + 1];
    const double b = img.pixels[3 * i + 2];
    long v = std::lround(0.299 * r + 0.587 * g + 0.114 * b);
    if (v < 0) v = 0;
    if (v > 255) v = 255;
    out.pixels[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

// Bilinear resize with align-corners sampling: source coordinate is
// dst_index * (src_len-1)/(dst_len-1), and a length-1 output axis samples
// source index 0. Results round half away from zero.
inline GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
  detail::check_gray(img, "resize_bilinear");
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("resize_bilinear: output size must be >= 1");
  GrayImage out{out_w, out_h, {}};
  out.pixels.resize(static_cast<std::size_t>(out_w) * out_h);
  const double sx = (out_w == 1) ? 0.0 : static_cast<double>(img.width - 1) / (out_w - 1);
  const double sy = (out_h == 1) ? 0.0 : static_cast<double>(img.height - 1) / (out_h - 1);
  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    int y0 = static_cast<int>(fy);
    if (y0 > img.height - 1) y0 = img.height - 1;
    const int y1 = (y0 + 1 < img.height) ? y0 + 1 : y0;
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      int x0 = static_cast<int>(fx);
      if (x0 > img.width - 1) x0 = img.width - 1;
      const int x1 = (x0 + 1 < img.width) ? x0 + 1 : x0;
      const double wx = fx - x0;
      const double top = (1.0 - wx) * img.at(x0, y0) + wx * img.at(x1, y0);
      const double bot = (1.0 - wx) * img.at(x0, y1) + wx * img.at(x1, y1);
      long v = std::lround((1.0 - wy) * top + wy * bot);
      if (v < 0) v = 0;
      if (v > 255) v = 255;
      out.at(x, y) = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

// Sub-raster of the intersection of the box with the image bounds; the box
// may overhang the edges but must intersect the image.
inline GrayImage crop(const GrayImage& img, int x, int y, int w, int h) {
  detail::check_gray(img, "crop");
  if (w < 1 || h < 1) throw std::invalid_argument("crop: box extents must be >= 1");
  const int x0 = x > 0 ? x : 0;
  const int y0 = y > 0 ? y : 0;
  const int x1 = (x + w < img.width) ? x + w : img.width;
  const int y1 = (y + h < img.height) ? y + h : img.height;
  if (x1 <= x0 || y1 <= y0) throw std::invalid_argument("crop: box lies outside the image");
  GrayImage out{x1 - x0, y1 - y0, {}};
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int yy = y0; yy < y1; ++yy) {
    for (int xx = x0; xx < x1; ++xx) {
      out.at(xx - x0, yy - y0) = img.at(xx, yy);
    }
  }
  return out;
}

}  // namespace streetpulse
