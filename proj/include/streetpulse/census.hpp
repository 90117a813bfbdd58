#pragma once

#include <array>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "streetpulse/detect.hpp"
#include "streetpulse/emotion.hpp"
#include "streetpulse/image.hpp"

namespace streetpulse {

struct CityEmotionCounts {
  std::string city;
  std::array<long long, kEmotionCount> counts{};  // canonical label order
  long long faces_processed = 0;
  bool operator==(const CityEmotionCounts&) const = default;
};

inline CityEmotionCounts merge_counts(const CityEmotionCounts& a, const CityEmotionCounts& b) {
  if (a.city != b.city) throw std::invalid_argument("merge_counts: city name mismatch");
  CityEmotionCounts r = a;
  for (int i = 0; i < kEmotionCount; ++i) r.counts[i] += b.counts[i];
  r.faces_processed += b.faces_processed;
  return r;
}

struct DetectorParams {
  double scale = 1.2;
  int stride = 8;
  double nms_iou = 0.3;
};

// All faces found in one frame, classified, in NMS output order.
inline std::vector<EmotionLabel> classify_frame(const GrayImage& frame,
                                                const LinearFaceModel& detector,
                                                const std::vector<LayerSpec>& spec,
                                                const ModelWeights& classifier,
                                                const DetectorParams& params) {
  std::vector<EmotionLabel> labels;
  for (const Detection& det : detect_faces(frame, detector, params.scale, params.stride,
                                           params.nms_iou)) {
    const GrayImage face = resize_bilinear(crop(frame, det.x, det.y, det.w, det.h), 48, 48);
    labels.push_back(predict(spec, classifier, face).argmax());
  }
  return labels;
}

// Walks the frames in order, detects and classifies faces, and counts the
// argmax label per face until max_faces crops have been classified. With
// jobs > 1 the per-frame work runs on a thread pool; the fold over frames
// stays sequential, so the result is identical to the single-threaded run.
inline CityEmotionCounts process_city(const std::string& city, const std::vector<GrayImage>& frames,
                                      const LinearFaceModel& detector,
                                      const std::vector<LayerSpec>& spec,
                                      const ModelWeights& classifier, long long max_faces,
                                      const DetectorParams& params = {}, int jobs = 1) {
  if (max_faces < 1) throw std::invalid_argument("process_city: max_faces must be >= 1");
  if (jobs < 1) throw std::invalid_argument("process_city: jobs must be >= 1");

  std::vector<std::vector<EmotionLabel>> per_frame(frames.size());
  if (jobs == 1 || frames.size() < 2) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      per_frame[i] = classify_frame(frames[i], detector, spec, classifier, params);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= frames.size()) return;
        try {
          per_frame[i] = classify_frame(frames[i], detector, spec, classifier, params);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<std::size_t>(jobs, frames.size());
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  CityEmotionCounts result;
  result.city = city;
  for (const std::vector<EmotionLabel>& labels : per_frame) {
    for (EmotionLabel label : labels) {
      if (result.faces_processed >= max_faces) return result;
      result.counts[static_cast<int>(label)] += 1;
      result.faces_processed += 1;
    }
  }
  return result;
}

// "city,emotion,value" with one row per (city, emotion) pair in canonical
// label order, zero counts included, cities in input order.
inline std::string export_csv(const std::vector<CityEmotionCounts>& results) {
  std::string out = "city,emotion,value\n";
  for (const CityEmotionCounts& c : results) {
    for (int i = 0; i < kEmotionCount; ++i) {
      out += c.city;
      out += ',';
      out += emotion_name(static_cast<EmotionLabel>(i));
      out += ',';
      out += std::to_string(c.counts[i]);
      out += '\n';
    }
  }
  return out;
}

inline std::vector<CityEmotionCounts> import_csv(std::string_view text) {
  std::vector<CityEmotionCounts> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    const bool last = end == text.size();
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (last) break;
      continue;
    }
    if (!saw_header) {
      if (line != "city,emotion,value") {
        throw std::runtime_error("census csv: expected header \"city,emotion,value\"");
      }
      saw_header = true;
      if (last) break;
      continue;
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? std::string_view::npos
                                                        : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
      throw std::runtime_error("census csv: malformed row " + std::to_string(line_no));
    }
    const std::string city(line.substr(0, c1));
    const std::string_view emotion = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string_view value = line.substr(c2 + 1);

    const std::optional<EmotionLabel> label = emotion_from_name(emotion);
    if (!label) {
      throw std::runtime_error("census csv: unknown emotion \"" + std::string(emotion) +
                               "\" at row " + std::to_string(line_no));
    }
    long long count = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), count);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      throw std::runtime_error("census csv: malformed value at row " + std::to_string(line_no));
    }
    if (count < 0) {
      throw std::runtime_error("census csv: negative value at row " + std::to_string(line_no));
    }

    CityEmotionCounts* entry = nullptr;
    for (CityEmotionCounts& c : out) {
      if (c.city == city) {
        entry = &c;
        break;
      }
    }
    if (!entry) {
      out.push_back({city, {}, 0});
      entry = &out.back();
    }
    entry->counts[static_cast<int>(*label)] += count;
    entry->faces_processed += count;
    if (last) break;
  }
  if (!saw_header) throw std::runtime_error("census csv: empty input");
  return out;
}

// Flat key=value manifest. Recognized keys: city.<name>.dir, max_faces,
// detector, classifier, scale, stride, nms_iou, threshold. Blank lines and
// '#' comments are skipped. Relative paths are resolved by the caller
// against the manifest's own directory.
struct CensusManifest {
  struct City {
    std::string name;
    std::string dir;
    bool operator==(const City&) const = default;
  };
  std::vector<City> cities;
  long long max_faces = 300;
  std::string detector;
  std::string classifier;
  double scale = 1.2;
  int stride = 8;
  double nms_iou = 0.3;
  std::optional<double> threshold;  // overrides the model file's threshold
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_manifest_double(std::string_view v, const std::string& key) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::runtime_error("manifest: bad numeric value for " + key);
  }
  return value;
}

inline long long parse_manifest_int(std::string_view v, const std::string& key) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::runtime_error("manifest: bad integer value for " + key);
  }
  return value;
}

}  // namespace detail

inline CensusManifest parse_manifest(std::string_view text) {
  CensusManifest m;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const bool last = end == text.size();
    std::string_view line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (!line.empty() && line.front() != '#') {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw std::runtime_error("manifest: expected key=value, got \"" + std::string(line) + "\"");
      }
      const std::string key(detail::trim(line.substr(0, eq)));
      const std::string_view value = detail::trim(line.substr(eq + 1));
      if (key.starts_with("city.") && key.ends_with(".dir") && key.size() > 9) {
        const std::string name = key.substr(5, key.size() - 9);
        for (const CensusManifest::City& c : m.cities) {
          if (c.name == name) throw std::runtime_error("manifest: duplicate city " + name);
        }
        m.cities.push_back({name, std::string(value)});
      } else if (key == "max_faces") {
        m.max_faces = detail::parse_manifest_int(value, key);
        if (m.max_faces < 1) throw std::runtime_error("manifest: max_faces must be >= 1");
      } else if (key == "detector") {
        m.detector = std::string(value);
      } else if (key == "classifier") {
        m.classifier = std::string(value);
      } else if (key == "scale") {
        m.scale = detail::parse_manifest_double(value, key);
      } else if (key == "stride") {
        m.stride = static_cast<int>(detail::parse_manifest_int(value, key));
      } else if (key == "nms_iou") {
        m.nms_iou = detail::parse_manifest_double(value, key);
      } else if (key == "threshold") {
        m.threshold = detail::parse_manifest_double(value, key);
      } else {
        throw std::runtime_error("manifest: unknown key \"" + key + "\"");
      }
    }
    if (last) break;
  }
  return m;
}

}  // namespace streetpulse
