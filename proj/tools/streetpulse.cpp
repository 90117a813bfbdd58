#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streetpulse/streetpulse.hpp"

namespace fs = std::filesystem;
namespace sp = streetpulse;

namespace {

std::vector<std::uint8_t> read_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_binary(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("cannot write " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path);
}

sp::GrayImage load_gray(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_binary(path);
  sp::PnmImage img = sp::load_pnm(bytes);
  if (auto* g = std::get_if<sp::GrayImage>(&img)) return std::move(*g);
  return sp::to_grayscale(std::get<sp::RgbImage>(img));
}

bool pnm_extension(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".pnm" || ext == ".ppm";
}

// Regular files with a netpbm extension, in lexicographic file-name order.
std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && pnm_extension(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return files;
}

std::vector<sp::GrayImage> load_patches(const std::string& dir, int expected_side) {
  std::vector<sp::GrayImage> out;
  for (const fs::path& p : list_frames(dir)) {
    sp::GrayImage img = load_gray(p.string());
    if (img.width != expected_side || img.height != expected_side) {
      throw std::runtime_error(p.string() + ": expected " + std::to_string(expected_side) + "x" +
                               std::to_string(expected_side) + " patch, got " +
                               std::to_string(img.width) + "x" + std::to_string(img.height));
    }
    out.push_back(std::move(img));
  }
  return out;
}

std::string resolve_against(const fs::path& base, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (base / p).string();
}

sp::CiMethod parse_method(const std::string& name) {
  return name == "wald" ? sp::CiMethod::wald : sp::CiMethod::wilson;
}

struct TrainEmotionOpts {
  std::string csv, out, log;
  int epochs = 30, batch = 32;
  float lr = 0.01f, momentum = 0.9f;
  std::uint32_t seed = 42;
  std::uint64_t limit = 0;
};

int run_train_emotion(const TrainEmotionOpts& o) {
  std::vector<sp::FerExample> all = sp::load_fer_csv(read_text(o.csv));
  std::vector<sp::FerExample> training;
  for (sp::FerExample& ex : all) {
    if (ex.split == sp::FerSplit::Training) training.push_back(std::move(ex));
    if (o.limit > 0 && training.size() >= o.limit) break;
  }
  if (training.empty()) throw std::runtime_error(o.csv + ": no Training rows");
  auto [spec, weights] = sp::build_model(o.seed);
  sp::TrainOptions topts;
  topts.epochs = o.epochs;
  topts.batch_size = o.batch;
  topts.lr = o.lr;
  topts.momentum = o.momentum;
  topts.seed = o.seed;
  const std::vector<sp::EpochLog> log = sp::train_emotion(spec, weights, training, topts);
  std::string log_text;
  for (std::size_t e = 0; e < log.size(); ++e) {
    char line[128];
    std::snprintf(line, sizeof(line), "epoch %zu/%zu loss %.6f accuracy %.4f\n", e + 1, log.size(),
                  log[e].loss, log[e].accuracy);
    std::cout << line;
    log_text += line;
  }
  write_binary(o.out, sp::save_weights(spec, weights));
  if (!o.log.empty()) write_text(o.log, log_text);
  std::cout << "trained on " << training.size() << " examples, weights written to " << o.out
            << "\n";
  return 0;
}

struct EvalEmotionOpts {
  std::string weights, csv, split = "PublicTest";
  std::uint64_t limit = 0;
};

int run_eval_emotion(const EvalEmotionOpts& o) {
  const auto [spec, weights] = sp::load_weights(read_binary(o.weights));
  const sp::FerSplit want = o.split == "Training"
                                ? sp::FerSplit::Training
                                : (o.split == "PrivateTest" ? sp::FerSplit::PrivateTest
                                                            : sp::FerSplit::PublicTest);
  std::vector<sp::FerExample> subset;
  for (sp::FerExample& ex : sp::load_fer_csv(read_text(o.csv))) {
    if (ex.split == want) subset.push_back(std::move(ex));
    if (o.limit > 0 && subset.size() >= o.limit) break;
  }
  if (subset.empty()) throw std::runtime_error(o.csv + ": no rows in split " + o.split);
  const sp::EvalResult r = sp::evaluate(spec, weights, subset);
  char line[64];
  std::snprintf(line, sizeof(line), "accuracy %.4f on %zu examples\n", r.accuracy, subset.size());
  std::cout << line;
  std::cout << "confusion matrix (rows = true, columns = predicted):\n";
  std::cout << "          ";
  for (sp::EmotionLabel l : sp::kEmotionOrder) {
    std::snprintf(line, sizeof(line), "%9s", std::string(sp::emotion_name(l)).c_str());
    std::cout << line;
  }
  std::cout << "\n";
  for (int i = 0; i < sp::kEmotionCount; ++i) {
    std::snprintf(line, sizeof(line), "%10s",
                  std::string(sp::emotion_name(static_cast<sp::EmotionLabel>(i))).c_str());
    std::cout << line;
    for (int j = 0; j < sp::kEmotionCount; ++j) {
      std::snprintf(line, sizeof(line), "%9d", r.confusion[i][j]);
      std::cout << line;
    }
    std::cout << "\n";
  }
  return 0;
}

struct TrainDetectorOpts {
  std::string positives, negatives, out;
  int epochs = 50;
  float lr = 0.1f;
  float threshold = 0.0f;
  std::uint32_t seed = 42;
};

int run_train_detector(const TrainDetectorOpts& o) {
  const std::vector<sp::GrayImage> pos = load_patches(o.positives, sp::HogDescriptor::kWindow);
  const std::vector<sp::GrayImage> neg = load_patches(o.negatives, sp::HogDescriptor::kWindow);
  if (pos.empty()) throw std::runtime_error(o.positives + ": no positive patches");
  if (neg.empty()) throw std::runtime_error(o.negatives + ": no negative patches");
  sp::LinearFaceModel model = sp::train_detector(pos, neg, o.epochs, o.lr, o.seed);
  model.threshold = o.threshold;
  write_binary(o.out, sp::save_detector(model));
  std::cout << "trained detector on " << pos.size() << " positives / " << neg.size()
            << " negatives, model written to " << o.out << "\n";
  return 0;
}

struct DetectOpts {
  std::string image, model, out;
  double scale = 1.2, nms_iou = 0.3;
  int stride = 8;
};

int run_detect(const DetectOpts& o) {
  const sp::GrayImage img = load_gray(o.image);
  const sp::LinearFaceModel model = sp::load_detector(read_binary(o.model));
  const std::vector<sp::Detection> dets =
      sp::detect_faces(img, model, o.scale, o.stride, o.nms_iou);
  std::string text;
  for (const sp::Detection& d : dets) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d %d %d %d %.6f\n", d.x, d.y, d.w, d.h,
                  static_cast<double>(d.score));
    text += line;
  }
  std::cout << text;
  std::cerr << dets.size() << " detection(s)\n";
  if (!o.out.empty()) write_text(o.out, text);
  return 0;
}

struct CensusOpts {
  std::string manifest, out;
  int jobs = 1;
};

int run_census(const CensusOpts& o) {
  const sp::CensusManifest manifest = sp::parse_manifest(read_text(o.manifest));
  const fs::path base = fs::path(o.manifest).parent_path();
  if (manifest.detector.empty()) throw std::runtime_error(o.manifest + ": detector path missing");
  if (manifest.classifier.empty()) {
    throw std::runtime_error(o.manifest + ": classifier path missing");
  }
  sp::LinearFaceModel detector =
      sp::load_detector(read_binary(resolve_against(base, manifest.detector)));
  if (manifest.threshold) detector.threshold = static_cast<float>(*manifest.threshold);
  const auto [spec, classifier] =
      sp::load_weights(read_binary(resolve_against(base, manifest.classifier)));
  sp::DetectorParams params;
  params.scale = manifest.scale;
  params.stride = manifest.stride;
  params.nms_iou = manifest.nms_iou;

  std::vector<sp::CityEmotionCounts> results;
  for (const sp::CensusManifest::City& city : manifest.cities) {
    std::vector<sp::GrayImage> frames;
    for (const fs::path& p : list_frames(resolve_against(base, city.dir))) {
      try {
        frames.push_back(load_gray(p.string()));
      } catch (const std::exception& e) {
        std::cerr << "warning: skipping unreadable frame " << p.string() << ": " << e.what()
                  << "\n";
      }
    }
    results.push_back(sp::process_city(city.name, frames, detector, spec, classifier,
                                       manifest.max_faces, params, o.jobs));
    std::cerr << city.name << ": " << results.back().faces_processed << " face(s) from "
              << frames.size() << " frame(s)\n";
  }
  write_text(o.out, sp::export_csv(results));
  std::cout << "census written to " << o.out << "\n";
  return 0;
}

struct StatsOpts {
  std::string in, method = "wilson";
};

int run_stats(const StatsOpts& o) {
  const std::vector<sp::CityEmotionCounts> counts = sp::import_csv(read_text(o.in));
  const sp::Report report = sp::render_report(counts, parse_method(o.method));
  std::cout << report.summary;

  // Pairwise two-proportion z tests are informational; the omnibus verdict
  // above is the headline.
  std::vector<const sp::CityEmotionCounts*> with_trials;
  for (const sp::CityEmotionCounts& c : counts) {
    if (c.faces_processed > 0) with_trials.push_back(&c);
  }
  if (with_trials.size() >= 2) {
    const int happy = static_cast<int>(sp::EmotionLabel::Happy);
    int significant = 0, total = 0;
    std::string lines;
    for (std::size_t i = 0; i < with_trials.size(); ++i) {
      for (std::size_t j = i + 1; j < with_trials.size(); ++j) {
        const sp::TwoProportionResult r =
            sp::two_proportion_z(with_trials[i]->counts[happy], with_trials[i]->faces_processed,
                                 with_trials[j]->counts[happy], with_trials[j]->faces_processed);
        ++total;
        if (r.significant) {
          ++significant;
          char line[160];
          std::snprintf(line, sizeof(line), "  %s vs %s: z=%.3f\n", with_trials[i]->city.c_str(),
                        with_trials[j]->city.c_str(), r.z);
          lines += line;
        }
      }
    }
    std::cout << "pairwise two-proportion z tests at 0.05: " << significant << " of " << total
              << " pair(s) significant\n";
    std::cout << lines;
  }
  return 0;
}

struct ReportOpts {
  std::string in, out, method = "wilson";
};

int run_report(const ReportOpts& o) {
  const std::vector<sp::CityEmotionCounts> counts = sp::import_csv(read_text(o.in));
  const sp::Report report = sp::render_report(counts, parse_method(o.method));
  write_text(o.out, report.svg);
  std::cout << report.summary;
  std::cout << "report written to " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"street-footage happiness census pipeline"};
  app.require_subcommand(1);

  TrainEmotionOpts te;
  CLI::App* te_cmd = app.add_subcommand("train-emotion", "train the 7-class emotion CNN");
  te_cmd->add_option("--csv", te.csv, "FER-2013 style CSV")->required();
  te_cmd->add_option("--out", te.out, "output weights file")->required();
  te_cmd->add_option("--log", te.log, "write the per-epoch loss log to this file");
  te_cmd->add_option("--epochs", te.epochs, "training epochs")->check(CLI::PositiveNumber);
  te_cmd->add_option("--batch", te.batch, "mini-batch size")->check(CLI::PositiveNumber);
  te_cmd->add_option("--lr", te.lr, "learning rate");
  te_cmd->add_option("--momentum", te.momentum, "SGD momentum");
  te_cmd->add_option("--seed", te.seed, "PRNG seed")->envname("STREETPULSE_SEED");
  te_cmd->add_option("--limit", te.limit, "cap on training examples (0 = all)");

  EvalEmotionOpts ee;
  CLI::App* ee_cmd = app.add_subcommand("eval-emotion", "evaluate emotion weights on a CSV split");
  ee_cmd->add_option("--weights", ee.weights, "weights file")->required();
  ee_cmd->add_option("--csv", ee.csv, "FER-2013 style CSV")->required();
  ee_cmd->add_option("--split", ee.split, "split to evaluate")
      ->check(CLI::IsMember({"Training", "PublicTest", "PrivateTest"}));
  ee_cmd->add_option("--limit", ee.limit, "cap on examples (0 = all)");

  TrainDetectorOpts td;
  CLI::App* td_cmd = app.add_subcommand("train-detector", "train the HOG face detector");
  td_cmd->add_option("--positives", td.positives, "directory of 48x48 positive patches")
      ->required();
  td_cmd->add_option("--negatives", td.negatives, "directory of 48x48 negative patches")
      ->required();
  td_cmd->add_option("--out", td.out, "output model file")->required();
  td_cmd->add_option("--epochs", td.epochs, "training epochs")->check(CLI::PositiveNumber);
  td_cmd->add_option("--lr", td.lr, "learning rate");
  td_cmd->add_option("--threshold", td.threshold, "decision threshold stored in the model");
  td_cmd->add_option("--seed", td.seed, "PRNG seed")->envname("STREETPULSE_SEED");

  DetectOpts de;
  CLI::App* de_cmd = app.add_subcommand("detect", "detect faces in one image");
  de_cmd->add_option("--image", de.image, "input PGM/PPM image")->required();
  de_cmd->add_option("--model", de.model, "detector model file")->required();
  de_cmd->add_option("--out", de.out, "also write detections to this file");
  de_cmd->add_option("--scale", de.scale, "pyramid scale factor");
  de_cmd->add_option("--stride", de.stride, "window stride in pixels")->check(CLI::PositiveNumber);
  de_cmd->add_option("--nms-iou", de.nms_iou, "NMS IoU threshold");

  CensusOpts ce;
  CLI::App* ce_cmd = app.add_subcommand("census", "run the per-city census from a manifest");
  ce_cmd->add_option("--manifest", ce.manifest, "key=value manifest file")->required();
  ce_cmd->add_option("--out", ce.out, "output census CSV")->required();
  ce_cmd->add_option("--jobs", ce.jobs, "worker threads for frame processing")
      ->check(CLI::PositiveNumber);

  StatsOpts st;
  CLI::App* st_cmd = app.add_subcommand("stats", "summarize a census CSV");
  st_cmd->add_option("--in", st.in, "census CSV")->required();
  st_cmd->add_option("--method", st.method, "confidence interval method")
      ->check(CLI::IsMember({"wald", "wilson"}));

  ReportOpts re;
  CLI::App* re_cmd = app.add_subcommand("report", "render the SVG report for a census CSV");
  re_cmd->add_option("--in", re.in, "census CSV")->required();
  re_cmd->add_option("--out", re.out, "output SVG file")->required();
  re_cmd->add_option("--method", re.method, "confidence interval method")
      ->check(CLI::IsMember({"wald", "wilson"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(te_cmd)) return run_train_emotion(te);
    if (app.got_subcommand(ee_cmd)) return run_eval_emotion(ee);
    if (app.got_subcommand(td_cmd)) return run_train_detector(td);
    if (app.got_subcommand(de_cmd)) return run_detect(de);
    if (app.got_subcommand(ce_cmd)) return run_census(ce);
    if (app.got_subcommand(st_cmd)) return run_stats(st);
    if (app.got_subcommand(re_cmd)) return run_report(re);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
