#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "streetpulse/image.hpp"

namespace streetpulse {

// Histogram-of-oriented-gradients descriptor for one 48x48 detector window:
// 8x8 cells (6x6 grid), 2x2-cell blocks at 1-cell stride (5x5 grid), 9
// unsigned orientation bins over 0..180 degrees. Blocks are L2-normalized
// independently and concatenated.
struct HogDescriptor {
  static constexpr int kWindow = 48;
  static constexpr int kCell = 8;
  static constexpr int kBlock = 2;  // cells per block side
  static constexpr int kBins = 9;
  static constexpr int kCellsPerSide = kWindow / kCell;               // 6
  static constexpr int kBlocksPerSide = kCellsPerSide - kBlock + 1;   // 5
  static constexpr int kLength =
      kBlocksPerSide * kBlocksPerSide * kBlock * kBlock * kBins;      // 900

  std::vector<float> values;
};

inline HogDescriptor hog_descriptor(const GrayImage& window) {
  if (window.width != HogDescriptor::kWindow || window.height != HogDescriptor::kWindow) {
    throw std::invalid_argument("hog: window must be 48x48");
  }
  constexpr int N = HogDescriptor::kWindow;
  constexpr int C = HogDescriptor::kCellsPerSide;
  constexpr int B = HogDescriptor::kBlocksPerSide;
  constexpr int BINS = HogDescriptor::kBins;
  constexpr double kBinWidth = 180.0 / BINS;

  // Cell histograms: soft magnitude-weighted votes split linearly between
  // the two bins whose centers ((i + 0.5) * 20 degrees) bracket the folded
  // orientation, wrapping across the 0/180 seam.
  double cells[C][C][BINS] = {};
  for (int y = 0; y < N; ++y) {
    for (int x = 0; x < N; ++x) {
      const int xm = x > 0 ? x - 1 : 0, xp = x < N - 1 ? x + 1 : N - 1;
      const int ym = y > 0 ? y - 1 : 0, yp = y < N - 1 ? y + 1 : N - 1;
      const double gx = static_cast<double>(window.at(xp, y)) - window.at(xm, y);
      const double gy = static_cast<double>(window.at(x, yp)) - window.at(x, ym);
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
      if (theta < 0.0) theta += 180.0;
      if (theta >= 180.0) theta -= 180.0;
      const double t = theta / kBinWidth - 0.5;
      const int lo = static_cast<int>(std::floor(t));
      const double frac = t - lo;
      const int bin0 = (lo + BINS) % BINS;
      const int bin1 = (bin0 + 1) % BINS;
      double* hist = cells[y / HogDescriptor::kCell][x / HogDescriptor::kCell];
      hist[bin0] += (1.0 - frac) * mag;
      hist[bin1] += frac * mag;
    }
  }

  HogDescriptor d;
  d.values.reserve(HogDescriptor::kLength);
  for (int by = 0; by < B; ++by) {
    for (int bx = 0; bx < B; ++bx) {
      double norm_sq = 0.0;
      for (int cy = 0; cy < HogDescriptor::kBlock; ++cy) {
        for (int cx = 0; cx < HogDescriptor::kBlock; ++cx) {
          for (int bin = 0; bin < BINS; ++bin) {
            const double v = cells[by + cy][bx + cx][bin];
            norm_sq += v * v;
          }
        }
      }
      const double inv = 1.0 / std::sqrt(norm_sq + 1e-6);
      for (int cy = 0; cy < HogDescriptor::kBlock; ++cy) {
        for (int cx = 0; cx < HogDescriptor::kBlock; ++cx) {
          for (int bin = 0; bin < BINS; ++bin) {
            d.values.push_back(static_cast<float>(cells[by + cy][bx + cx][bin] * inv));
          }
        }
      }
    }
  }
  return d;
}

}  // namespace streetpulse
