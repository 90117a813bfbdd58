#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace streetpulse {

// Shaped array of 32-bit floats, row-major, rank 1 to 4. Activations,
// weights and gradients are all Tensor values.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(checked_numel(shape), 0.0f);
  }

  Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != checked_numel(shape)) {
      throw std::invalid_argument("Tensor: data length does not match shape");
    }
  }

  std::size_t numel() const { return data.size(); }

  bool operator==(const Tensor&) const = default;

  static std::size_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4) {
      throw std::invalid_argument("Tensor: rank must be 1 to 4");
    }
    std::size_t n = 1;
    for (int e : shape) {
      if (e < 1) throw std::invalid_argument("Tensor: extents must be >= 1");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }
};

}  // namespace streetpulse
