#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "streetpulse/hog.hpp"
#include "streetpulse/image.hpp"
#include "streetpulse/rng.hpp"
#include "streetpulse/weights_io.hpp"

namespace streetpulse {

// A detector hit in original-frame pixel coordinates.
struct Detection {
  int x = 0, y = 0;
  int w = 0, h = 0;
  float score = 0.0f;
  bool operator==(const Detection&) const = default;
};

inline double iou(const Detection& a, const Detection& b) {
  const int ix0 = std::max(a.x, b.x), iy0 = std::max(a.y, b.y);
  const int ix1 = std::min(a.x + a.w, b.x + b.w), iy1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = static_cast<double>(std::max(0, ix1 - ix0)) * std::max(0, iy1 - iy0);
  const double uni = static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter;
  return inter / uni;
}

// Greedy non-maximum suppression: keep the best remaining box, drop every
// box with IoU strictly above the threshold against it, repeat. Score ties
// resolve in input order; output is sorted by descending score.
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw std::invalid_argument("nms: iou threshold must be in [0,1]");
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  std::vector<bool> dead(dets.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dead[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (!dead[j] && iou(dets[i], dets[j]) > iou_threshold) dead[j] = true;
    }
  }
  return kept;
}

struct PyramidLevel {
  GrayImage image;
  double factor;  // original size / level size (nominal)
};

// Level k has dimensions floor(original / scale^k); the sequence stops
// before either side would drop below min_side. Every level is resampled
// from the original, not from the previous level.
inline std::vector<PyramidLevel> image_pyramid(const GrayImage& img, double scale, int min_side) {
  if (!(scale > 1.0)) throw std::invalid_argument("pyramid: scale must be > 1");
  if (min_side < 48) throw std::invalid_argument("pyramid: min_side must be >= 48");
  std::vector<PyramidLevel> levels;
  if (img.width < min_side || img.height < min_side) return levels;
  levels.push_back({img, 1.0});
  double factor = 1.0;
  for (;;) {
    factor *= scale;
    const int w = static_cast<int>(std::floor(img.width / factor));
    const int h = static_cast<int>(std::floor(img.height / factor));
    if (w < min_side || h < min_side) break;
    levels.push_back({resize_bilinear(img, w, h), factor});
  }
  return levels;
}

// Linear classifier over HOG descriptors; a window fires when
// weights . descriptor + bias > threshold.
struct LinearFaceModel {
  std::vector<float> weights;
  float bias = 0.0f;
  float threshold = 0.0f;
  bool operator==(const LinearFaceModel&) const = default;
};

inline double detector_score(const LinearFaceModel& model, const HogDescriptor& d) {
  double s = model.bias;
  for (int i = 0; i < HogDescriptor::kLength; ++i) {
    s += static_cast<double>(model.weights[i]) * d.values[i];
  }
  return s;
}

// Slides the 48x48 window at the given stride over every pyramid level and
// reports hits mapped back to original-frame coordinates (clipped to the
// frame). Raw hits only: apply nms() to deduplicate.
inline std::vector<Detection> scan(const GrayImage& img, const LinearFaceModel& model, int stride,
                                   double pyramid_scale = 1.2, int min_side = 48) {
  if (stride < 1) throw std::invalid_argument("scan: stride must be >= 1");
  if (model.weights.size() != HogDescriptor::kLength) {
    throw std::invalid_argument("scan: model weight length mismatch");
  }
  constexpr int N = HogDescriptor::kWindow;
  std::vector<Detection> out;
  for (const PyramidLevel& level : image_pyramid(img, pyramid_scale, min_side)) {
    const GrayImage& li = level.image;
    for (int y = 0; y + N <= li.height; y += stride) {
      for (int x = 0; x + N <= li.width; x += stride) {
        const GrayImage window = crop(li, x, y, N, N);
        const double s = detector_score(model, hog_descriptor(window));
        if (s > model.threshold) {
          Detection det;
          det.x = static_cast<int>(std::lround(x * level.factor));
          det.y = static_cast<int>(std::lround(y * level.factor));
          det.w = static_cast<int>(std::lround(N * level.factor));
          det.h = static_cast<int>(std::lround(N * level.factor));
          det.x = std::min(det.x, img.width - 1);
          det.y = std::min(det.y, img.height - 1);
          det.w = std::min(det.w, img.width - det.x);
          det.h = std::min(det.h, img.height - det.y);
          det.score = static_cast<float>(s);
          out.push_back(det);
        }
      }
    }
  }
  return out;
}

inline std::vector<Detection> detect_faces(const GrayImage& img, const LinearFaceModel& model,
                                           double pyramid_scale, int stride, double nms_iou) {
  return nms(scan(img, model, stride, pyramid_scale), nms_iou);
}

// Logistic regression on HOG descriptors, zero-initialized, per-sample SGD
// with a seeded shuffle each epoch. Deterministic for a given seed.
inline LinearFaceModel train_detector(const std::vector<GrayImage>& positives,
                                      const std::vector<GrayImage>& negatives, int epochs, float lr,
                                      std::uint32_t seed) {
  if (positives.empty() || negatives.empty()) {
    throw std::invalid_argument("train_detector: both sample sets must be nonempty");
  }
  if (epochs < 1) throw std::invalid_argument("train_detector: epochs must be >= 1");
  if (!(lr > 0.0f)) throw std::invalid_argument("train_detector: lr must be > 0");

  std::vector<HogDescriptor> feats;
  std::vector<int> labels;
  for (const GrayImage& p : positives) {
    feats.push_back(hog_descriptor(p));
    labels.push_back(1);
  }
  for (const GrayImage& n : negatives) {
    feats.push_back(hog_descriptor(n));
    labels.push_back(0);
  }

  LinearFaceModel model;
  model.weights.assign(HogDescriptor::kLength, 0.0f);
  SeededRng rng(seed);
  std::vector<std::size_t> order(feats.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const HogDescriptor& d = feats[idx];
      const double z = detector_score(model, d);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double g = p - labels[idx];
      for (int i = 0; i < HogDescriptor::kLength; ++i) {
        model.weights[i] -= static_cast<float>(lr * g * d.values[i]);
      }
      model.bias -= static_cast<float>(lr * g);
    }
  }
  return model;
}

// "HFD1" detector file: magic, u32 LE weight count, then weights, bias and
// threshold as little-endian float32.
inline std::vector<std::uint8_t> save_detector(const LinearFaceModel& model) {
  if (model.weights.size() != HogDescriptor::kLength) {
    throw std::invalid_argument("save_detector: weight length mismatch");
  }
  std::vector<std::uint8_t> out;
  out.push_back('H');
  out.push_back('F');
  out.push_back('D');
  out.push_back('1');
  detail::put_u32le(out, static_cast<std::uint32_t>(model.weights.size()));
  for (float v : model.weights) detail::put_f32le(out, v);
  detail::put_f32le(out, model.bias);
  detail::put_f32le(out, model.threshold);
  return out;
}

inline LinearFaceModel load_detector(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r{bytes, 0, "detector"};
  r.need(4);
  if (bytes[0] != 'H' || bytes[1] != 'F' || bytes[2] != 'D') {
    throw std::runtime_error("detector: bad magic");
  }
  if (bytes[3] != '1') throw std::runtime_error("detector: unsupported version");
  r.pos = 4;
  const std::uint32_t n = r.u32le();
  if (n != HogDescriptor::kLength) {
    throw std::runtime_error("detector: unexpected descriptor length");
  }
  LinearFaceModel model;
  model.weights.resize(n);
  for (float& v : model.weights) v = r.f32le();
  model.bias = r.f32le();
  model.threshold = r.f32le();
  if (!r.done()) throw std::runtime_error("detector: trailing bytes");
  return model;
}

}  // namespace streetpulse
