#pragma once

// Synthetic fixtures shared between the unit suite and the acceptance runner:
// a bright-cross detector pattern with hard negatives, a planted-pattern
// frame, and the 7-class flat-intensity classifier dataset.

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "streetpulse/detect.hpp"
#include "streetpulse/emotion.hpp"
#include "streetpulse/image.hpp"
#include "streetpulse/rng.hpp"

namespace testutil {

inline streetpulse::GrayImage blank(int w, int h, std::uint8_t fill) {
  return streetpulse::GrayImage{
      w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, fill)};
}

// 48x48 window: background 25 with a bright cross (rows and columns 20..27
// at 230), optionally shifted; shifted-out parts stay background.
inline streetpulse::GrayImage cross_window(int shift_x = 0, int shift_y = 0) {
  streetpulse::GrayImage img = blank(48, 48, 25);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      const int ux = x - shift_x, uy = y - shift_y;
      const bool in_v = ux >= 20 && ux <= 27 && uy >= 0 && uy <= 47;
      const bool in_h = uy >= 20 && uy <= 27 && ux >= 0 && ux <= 47;
      if ((in_v || in_h) && ux >= 0 && ux < 48 && uy >= 0 && uy < 48) {
        img.pixels[y * 48 + x] = 230;
      }
    }
  }
  return img;
}

inline void add_noise(streetpulse::GrayImage& img, streetpulse::SeededRng& rng, int amp) {
  for (auto& p : img.pixels) {
    const int v = static_cast<int>(p) + static_cast<int>(rng.below(2 * amp + 1)) - amp;
    p = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
}

// Positives: the cross pattern, clean and noisy. Negatives: flats, noise,
// single bars, and shifted crosses (what off-center windows see).
inline std::pair<std::vector<streetpulse::GrayImage>, std::vector<streetpulse::GrayImage>>
detector_training_sets(std::uint32_t seed = 99) {
  streetpulse::SeededRng rng(seed);
  std::vector<streetpulse::GrayImage> pos, neg;
  pos.push_back(cross_window());
  for (int i = 0; i < 11; ++i) {
    streetpulse::GrayImage w = cross_window();
    add_noise(w, rng, 10);
    pos.push_back(w);
  }
  neg.push_back(blank(48, 48, 25));
  neg.push_back(blank(48, 48, 230));
  for (int i = 0; i < 6; ++i) {
    streetpulse::GrayImage w = blank(48, 48, 128);
    add_noise(w, rng, 100);
    neg.push_back(w);
  }
  streetpulse::GrayImage hbar = blank(48, 48, 25), vbar = blank(48, 48, 25);
  for (int y = 20; y <= 27; ++y)
    for (int x = 0; x < 48; ++x) hbar.pixels[y * 48 + x] = 230;
  for (int y = 0; y < 48; ++y)
    for (int x = 20; x <= 27; ++x) vbar.pixels[y * 48 + x] = 230;
  neg.push_back(hbar);
  neg.push_back(vbar);
  for (const int s : {-32, -24, -16, 16, 24, 32}) {
    neg.push_back(cross_window(s, 0));
    neg.push_back(cross_window(0, s));
    neg.push_back(cross_window(s, s));
  }
  return {std::move(pos), std::move(neg)};
}

// A quiet frame with one cross pattern whose top-left corner is (x, y).
inline streetpulse::GrayImage planted_frame(int w, int h, int x, int y) {
  streetpulse::GrayImage frame = blank(w, h, 25);
  const streetpulse::GrayImage pat = cross_window();
  for (int dy = 0; dy < 48; ++dy) {
    for (int dx = 0; dx < 48; ++dx) {
      frame.pixels[static_cast<std::size_t>(y + dy) * w + (x + dx)] = pat.pixels[dy * 48 + dx];
    }
  }
  return frame;
}

// Cross detector trained once and shared across test cases.
inline const streetpulse::LinearFaceModel& trained_cross_detector() {
  static const streetpulse::LinearFaceModel model = [] {
    const auto [pos, neg] = detector_training_sets();
    return streetpulse::train_detector(pos, neg, 50, 0.5f, 7);
  }();
  return model;
}

// 7-class dataset: class k is a flat 48x48 image of intensity 36k+18.
inline std::vector<streetpulse::FerExample> flat_intensity_examples(int per_class) {
  std::vector<streetpulse::FerExample> out;
  for (int k = 0; k < streetpulse::kEmotionCount; ++k) {
    for (int c = 0; c < per_class; ++c) {
      streetpulse::FerExample e;
      e.label = static_cast<streetpulse::EmotionLabel>(k);
      e.image = blank(48, 48, static_cast<std::uint8_t>(36 * k + 18));
      e.split = streetpulse::FerSplit::Training;
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace testutil
