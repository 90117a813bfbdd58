#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "streetpulse/image.hpp"
#include "streetpulse/nn.hpp"
#include "streetpulse/rng.hpp"
#include "streetpulse/tensor.hpp"

namespace streetpulse {

// Canonical label order; every distribution, confusion matrix and CSV export
// indexes emotions in this order.
enum class EmotionLabel : int {
  Anger = 0,
  Sad = 1,
  Neutral = 2,
  Disgust = 3,
  Surprise = 4,
  Fear = 5,
  Happy = 6,
};

inline constexpr int kEmotionCount = 7;

inline constexpr std::array<EmotionLabel, kEmotionCount> kEmotionOrder = {
    EmotionLabel::Anger,    EmotionLabel::Sad,  EmotionLabel::Neutral, EmotionLabel::Disgust,
    EmotionLabel::Surprise, EmotionLabel::Fear, EmotionLabel::Happy,
};

inline std::string_view emotion_name(EmotionLabel label) {
  switch (label) {
    case EmotionLabel::Anger: return "Anger";
    case EmotionLabel::Sad: return "Sad";
    case EmotionLabel::Neutral: return "Neutral";
    case EmotionLabel::Disgust: return "Disgust";
    case EmotionLabel::Surprise: return "Surprise";
    case EmotionLabel::Fear: return "Fear";
    case EmotionLabel::Happy: return "Happy";
  }
  throw std::invalid_argument("emotion: bad label value");
}

inline std::optional<EmotionLabel> emotion_from_name(std::string_view name) {
  for (EmotionLabel label : kEmotionOrder) {
    if (emotion_name(label) == name) return label;
  }
  return std::nullopt;
}

// FER-2013 integer codes (the dataset's own convention, with "Angry"
// rendered as "Anger").
inline EmotionLabel emotion_from_fer_code(int code) {
  switch (code) {
    case 0: return EmotionLabel::Anger;
    case 1: return EmotionLabel::Disgust;
    case 2: return EmotionLabel::Fear;
    case 3: return EmotionLabel::Happy;
    case 4: return EmotionLabel::Sad;
    case 5: return EmotionLabel::Surprise;
    case 6: return EmotionLabel::Neutral;
    default: throw std::runtime_error("fer: emotion code outside 0-6");
  }
}

enum class FerSplit { Training, PublicTest, PrivateTest };

struct FerExample {
  EmotionLabel label = EmotionLabel::Anger;
  GrayImage image;
  FerSplit split = FerSplit::Training;
};

namespace detail {

inline int parse_int_field(std::string_view field, const std::string& context) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw std::runtime_error("fer: malformed integer in " + context);
  }
  return value;
}

}  // namespace detail

// FER-2013 CSV: header "emotion,pixels,Usage", then rows of an integer
// emotion code, 2304 space-separated pixel values in [0,255] (row-major
// 48x48), and a split name. Blank lines and surrounding quotes on the pixel
// field are tolerated.
inline std::vector<FerExample> load_fer_csv(std::string_view text) {
  std::vector<FerExample> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (!saw_header) {
      if (line != "emotion,pixels,Usage") {
        throw std::runtime_error("fer: expected header \"emotion,pixels,Usage\"");
      }
      saw_header = true;
      continue;
    }
    const std::string context = "row " + std::to_string(line_no);
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? std::string_view::npos
                                                        : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw std::runtime_error("fer: malformed " + context);
    }
    FerExample ex;
    const int code = detail::parse_int_field(line.substr(0, c1), context);
    ex.label = emotion_from_fer_code(code);

    std::string_view pixels = line.substr(c1 + 1, c2 - c1 - 1);
    if (pixels.size() >= 2 && pixels.front() == '"' && pixels.back() == '"') {
      pixels = pixels.substr(1, pixels.size() - 2);
    }
    ex.image.width = 48;
    ex.image.height = 48;
    ex.image.pixels.reserve(2304);
    std::size_t p = 0;
    while (p < pixels.size()) {
      while (p < pixels.size() && pixels[p] == ' ') ++p;
      if (p >= pixels.size()) break;
      std::size_t q = p;
      while (q < pixels.size() && pixels[q] != ' ') ++q;
      const int v = detail::parse_int_field(pixels.substr(p, q - p), context);
      if (v < 0 || v > 255) throw std::runtime_error("fer: pixel outside 0-255 in " + context);
      ex.image.pixels.push_back(static_cast<std::uint8_t>(v));
      p = q;
    }
    if (ex.image.pixels.size() != 2304) {
      throw std::runtime_error("fer: expected 2304 pixels in " + context + ", got " +
                               std::to_string(ex.image.pixels.size()));
    }

    const std::string_view split = line.substr(c2 + 1);
    if (split == "Training") {
      ex.split = FerSplit::Training;
    } else if (split == "PublicTest") {
      ex.split = FerSplit::PublicTest;
    } else if (split == "PrivateTest") {
      ex.split = FerSplit::PrivateTest;
    } else {
      throw std::runtime_error("fer: unknown split in " + context);
    }
    out.push_back(std::move(ex));
    if (pos > text.size()) break;
  }
  if (!saw_header) throw std::runtime_error("fer: empty input");
  return out;
}

// The fixed classifier stack on 1x48x48 input:
// conv3x3x32 - relu - conv3x3x64 - relu - pool - conv3x3x128 - relu - pool -
// flatten - dense 256 - relu - dense 7 - softmax.
inline std::vector<LayerSpec> emotion_layer_stack() {
  return {
      LayerSpec::conv2d(1, 32, 3),  LayerSpec::relu(),
      LayerSpec::conv2d(32, 64, 3), LayerSpec::relu(),
      LayerSpec::maxpool2(),
      LayerSpec::conv2d(64, 128, 3), LayerSpec::relu(),
      LayerSpec::maxpool2(),
      LayerSpec::flatten(),
      LayerSpec::dense(12800, 256), LayerSpec::relu(),
      LayerSpec::dense(256, 7),
      LayerSpec::softmax(),
  };
}

inline std::pair<std::vector<LayerSpec>, ModelWeights> build_model(std::uint32_t seed) {
  std::vector<LayerSpec> spec = emotion_layer_stack();
  ModelWeights weights = init_weights(spec, seed);
  return {std::move(spec), std::move(weights)};
}

// 48x48 gray image as a 1x48x48 tensor normalized to [0,1].
inline Tensor to_input_tensor(const GrayImage& face) {
  if (face.width != 48 || face.height != 48) {
    throw std::invalid_argument("emotion: input must be 48x48");
  }
  Tensor x({1, 48, 48});
  for (std::size_t i = 0; i < face.pixels.size(); ++i) {
    x.data[i] = static_cast<float>(face.pixels[i]) / 255.0f;
  }
  return x;
}

struct EmotionDistribution {
  std::array<float, kEmotionCount> probs{};

  float operator[](EmotionLabel label) const { return probs[static_cast<int>(label)]; }

  // Ties break toward the earlier label in canonical order.
  EmotionLabel argmax() const {
    int best = 0;
    for (int i = 1; i < kEmotionCount; ++i) {
      if (probs[i] > probs[best]) best = i;
    }
    return static_cast<EmotionLabel>(best);
  }
};

inline EmotionDistribution predict(const std::vector<LayerSpec>& spec, const ModelWeights& weights,
                                   const GrayImage& face) {
  const Tensor out = network_forward(spec, weights, to_input_tensor(face));
  if (out.numel() != kEmotionCount) {
    throw std::invalid_argument("emotion: model does not produce 7 outputs");
  }
  EmotionDistribution d;
  for (int i = 0; i < kEmotionCount; ++i) d.probs[i] = out.data[i];
  return d;
}

struct EpochLog {
  double loss = 0.0;      // mean cross-entropy over the epoch
  double accuracy = 0.0;  // training accuracy over the epoch
};

struct TrainOptions {
  int epochs = 30;
  int batch_size = 32;
  float lr = 0.01f;
  float momentum = 0.9f;
  std::uint32_t seed = 42;
};

// Mini-batch SGD with momentum on softmax cross-entropy. Examples are
// shuffled once per epoch by a PRNG seeded from opts.seed; batch gradients
// are averaged. Loss/accuracy are measured on the forward passes made during
// the epoch, so the run is fully deterministic for a given seed.
inline std::vector<EpochLog> train_emotion(const std::vector<LayerSpec>& spec,
                                           ModelWeights& weights,
                                           const std::vector<FerExample>& examples,
                                           const TrainOptions& opts) {
  if (examples.empty()) throw std::invalid_argument("train: empty training set");
  if (opts.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (opts.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  check_weights(spec, weights);
  if (spec.empty() || spec.back().kind != LayerKind::softmax) {
    throw std::invalid_argument("train: final layer must be softmax");
  }

  const std::size_t n = examples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(opts.seed);
  ModelWeights velocity = zeros_like(weights);
  std::vector<EpochLog> log;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += opts.batch_size) {
      const std::size_t m = std::min<std::size_t>(opts.batch_size, n - start);
      ModelWeights grad_acc = zeros_like(weights);
      for (std::size_t k = start; k < start + m; ++k) {
        const FerExample& ex = examples[order[k]];
        const int label = static_cast<int>(ex.label);
        const Tensor x = to_input_tensor(ex.image);
        const ForwardTrace trace = network_forward_trace(spec, weights, x);
        loss_sum += cross_entropy(trace.output, label);
        int pred = 0;
        for (int i = 1; i < kEmotionCount; ++i) {
          if (trace.output.data[i] > trace.output.data[pred]) pred = i;
        }
        if (pred == label) ++correct;
        const BackwardResult b = network_backward(spec, weights, trace, label);
        for (std::size_t l = 0; l < grad_acc.size(); ++l) {
          for (std::size_t i = 0; i < grad_acc[l].weights.data.size(); ++i) {
            grad_acc[l].weights.data[i] += b.grads[l].weights.data[i];
          }
          for (std::size_t i = 0; i < grad_acc[l].bias.data.size(); ++i) {
            grad_acc[l].bias.data[i] += b.grads[l].bias.data[i];
          }
        }
      }
      const float inv = 1.0f / static_cast<float>(m);
      for (LayerWeights& lw : grad_acc) {
        for (float& v : lw.weights.data) v *= inv;
        for (float& v : lw.bias.data) v *= inv;
      }
      sgd_step(weights, grad_acc, opts.lr, opts.momentum, velocity);
    }
    log.push_back({loss_sum / static_cast<double>(n),
                   static_cast<double>(correct) / static_cast<double>(n)});
  }
  return log;
}

struct EvalResult {
  double accuracy = 0.0;
  std::array<std::array<int, kEmotionCount>, kEmotionCount> confusion{};  // [true][predicted]
};

inline EvalResult evaluate(const std::vector<LayerSpec>& spec, const ModelWeights& weights,
                           const std::vector<FerExample>& examples) {
  if (examples.empty()) throw std::invalid_argument("evaluate: empty example set");
  EvalResult r;
  std::size_t correct = 0;
  for (const FerExample& ex : examples) {
    const EmotionLabel pred = predict(spec, weights, ex.image).argmax();
    r.confusion[static_cast<int>(ex.label)][static_cast<int>(pred)] += 1;
    if (pred == ex.label) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return r;
}

}  // namespace streetpulse
