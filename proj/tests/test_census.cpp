#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "streetpulse/census.hpp"

using namespace streetpulse;

namespace {

// Bias-only classifier over the shared tiny stack: always predicts Happy.
struct HappyClassifier {
  std::vector<LayerSpec> spec = {LayerSpec::flatten(), LayerSpec::dense(2304, 7),
                                 LayerSpec::softmax()};
  ModelWeights weights;
  HappyClassifier() {
    weights = init_weights(spec, 0);
    std::fill(weights[1].weights.data.begin(), weights[1].weights.data.end(), 0.0f);
    weights[1].bias.data[static_cast<int>(EmotionLabel::Happy)] = 3.0f;
  }
};

// Fires on every window: zero weights with threshold below any score.
LinearFaceModel permissive_detector() {
  LinearFaceModel m;
  m.weights.assign(HogDescriptor::kLength, 0.0f);
  m.threshold = -1.0f;
  return m;
}

}  // namespace

TEST_CASE("merge_counts adds per-emotion tallies") {
  CityEmotionCounts a{"Paris", {1, 0, 0, 0, 2, 3, 4}, 10};
  CityEmotionCounts b{"Paris", {0, 1, 0, 0, 5, 0, 1}, 7};
  const CityEmotionCounts m = merge_counts(a, b);
  CHECK(m.city == "Paris");
  CHECK(m.counts == std::array<long long, 7>{1, 1, 0, 0, 7, 3, 5});
  CHECK(m.faces_processed == 17);

  // commutative
  const CityEmotionCounts m2 = merge_counts(b, a);
  CHECK(m2 == m);

  // identity
  CHECK(merge_counts(a, CityEmotionCounts{"Paris", {}, 0}) == a);

  CHECK_THROWS_AS(merge_counts(a, CityEmotionCounts{"Tokyo", {}, 0}), std::invalid_argument);
}

TEST_CASE("census csv export writes canonical rows") {
  const std::string csv = export_csv(oracle::reference_census());
  CHECK(csv == oracle::reference_census_csv());

  SECTION("zero counts are written explicitly") {
    CityEmotionCounts c{"Oslo", {0, 0, 0, 0, 0, 0, 2}, 2};
    const std::string out = export_csv({c});
    CHECK(out == "city,emotion,value\n"
                 "Oslo,Anger,0\n"
                 "Oslo,Sad,0\n"
                 "Oslo,Neutral,0\n"
                 "Oslo,Disgust,0\n"
                 "Oslo,Surprise,0\n"
                 "Oslo,Fear,0\n"
                 "Oslo,Happy,2\n");
  }

  SECTION("no cities gives just the header") {
    CHECK(export_csv({}) == "city,emotion,value\n");
  }
}

TEST_CASE("census csv import reads the reference table") {
  const auto cities = import_csv(oracle::reference_census_csv());
  REQUIRE(cities.size() == 8);
  const char* names[] = {"Barcelona", "Istanbul", "Kiev",  "London",
                         "New York",  "Paris",    "Tokyo", "Copenhagen"};
  const long long happy[] = {5, 7, 4, 2, 8, 0, 5, 3};
  for (int i = 0; i < 8; ++i) {
    CHECK(cities[i].city == names[i]);
    CHECK(cities[i].counts[static_cast<int>(EmotionLabel::Happy)] == happy[i]);
    CHECK(cities[i].faces_processed == 300);
  }
  CHECK(cities[5].counts[static_cast<int>(EmotionLabel::Fear)] == 267);
  CHECK(cities[0].counts[static_cast<int>(EmotionLabel::Anger)] == 2);

  // import-export closes the loop bit-exactly
  CHECK(export_csv(cities) == oracle::reference_census_csv());
}

TEST_CASE("census csv import edge cases and errors") {
  SECTION("duplicate city/emotion rows accumulate") {
    const auto cities = import_csv("city,emotion,value\nParis,Happy,2\nParis,Happy,3\n");
    REQUIRE(cities.size() == 1);
    CHECK(cities[0].counts[static_cast<int>(EmotionLabel::Happy)] == 5);
    CHECK(cities[0].faces_processed == 5);
  }

  SECTION("crlf and missing trailing newline are tolerated") {
    const auto cities = import_csv("city,emotion,value\r\nParis,Happy,1\r\nParis,Fear,2");
    REQUIRE(cities.size() == 1);
    CHECK(cities[0].faces_processed == 3);
  }

  SECTION("cities appear in first-appearance order") {
    const auto cities =
        import_csv("city,emotion,value\nB,Happy,1\nA,Happy,1\nB,Fear,1\n");
    REQUIRE(cities.size() == 2);
    CHECK(cities[0].city == "B");
    CHECK(cities[1].city == "A");
  }

  CHECK_THROWS_WITH(import_csv(""), Catch::Matchers::ContainsSubstring("empty input"));
  CHECK_THROWS_WITH(import_csv("nope\n"), Catch::Matchers::ContainsSubstring("expected header"));
  CHECK_THROWS_WITH(import_csv("city,emotion,value\nParis,Happy\n"),
                    Catch::Matchers::ContainsSubstring("malformed row 2"));
  CHECK_THROWS_WITH(import_csv("city,emotion,value\nParis,Happy,1,9\n"),
                    Catch::Matchers::ContainsSubstring("malformed row 2"));
  CHECK_THROWS_WITH(import_csv("city,emotion,value\nParis,Joy,1\n"),
                    Catch::Matchers::ContainsSubstring("unknown emotion \"Joy\" at row 2"));
  CHECK_THROWS_WITH(import_csv("city,emotion,value\nParis,Happy,x\n"),
                    Catch::Matchers::ContainsSubstring("malformed value at row 2"));
  CHECK_THROWS_WITH(import_csv("city,emotion,value\nParis,Happy,-2\n"),
                    Catch::Matchers::ContainsSubstring("negative value at row 2"));
}

TEST_CASE("process_city counts faces frame by frame") {
  const HappyClassifier clf;
  const LinearFaceModel det = permissive_detector();

  // A blank 64x48 frame has three sliding windows whose zero scores tie;
  // NMS keeps exactly one, so each frame contributes one Happy face.
  const GrayImage frame = testutil::blank(64, 48, 25);

  SECTION("no frames, no faces") {
    const CityEmotionCounts r = process_city("Nowhere", {}, det, clf.spec, clf.weights, 300);
    CHECK(r.city == "Nowhere");
    CHECK(r.faces_processed == 0);
    for (const long long c : r.counts) CHECK(c == 0);
  }

  SECTION("frames smaller than the detector window contribute nothing") {
    const CityEmotionCounts r =
        process_city("Tiny", {testutil::blank(10, 10, 0)}, det, clf.spec, clf.weights, 300);
    CHECK(r.faces_processed == 0);
  }

  SECTION("one face per frame, counted as Happy") {
    const std::vector<GrayImage> frames(5, frame);
    const CityEmotionCounts r = process_city("Ville", frames, det, clf.spec, clf.weights, 300);
    CHECK(r.faces_processed == 5);
    CHECK(r.counts[static_cast<int>(EmotionLabel::Happy)] == 5);
  }

  SECTION("max_faces truncates the sequential fold") {
    const std::vector<GrayImage> frames(5, frame);
    const CityEmotionCounts r = process_city("Ville", frames, det, clf.spec, clf.weights, 3);
    CHECK(r.faces_processed == 3);
    CHECK(r.counts[static_cast<int>(EmotionLabel::Happy)] == 3);
  }

  SECTION("parallel run matches the single-threaded result") {
    std::vector<GrayImage> frames;
    for (int i = 0; i < 6; ++i) frames.push_back(frame);
    frames.push_back(testutil::blank(10, 10, 0));
    const CityEmotionCounts seq =
        process_city("Ville", frames, det, clf.spec, clf.weights, 4);
    const CityEmotionCounts par =
        process_city("Ville", frames, det, clf.spec, clf.weights, 4, {}, 3);
    CHECK(seq == par);
  }

  SECTION("splitting the frame list and merging matches one pass") {
    const std::vector<GrayImage> all(6, frame);
    const std::vector<GrayImage> first(all.begin(), all.begin() + 2);
    const std::vector<GrayImage> rest(all.begin() + 2, all.end());
    const CityEmotionCounts whole = process_city("V", all, det, clf.spec, clf.weights, 300);
    const CityEmotionCounts merged =
        merge_counts(process_city("V", first, det, clf.spec, clf.weights, 300),
                     process_city("V", rest, det, clf.spec, clf.weights, 300));
    CHECK(whole == merged);
  }

  SECTION("argument validation") {
    CHECK_THROWS_AS(process_city("X", {}, det, clf.spec, clf.weights, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(process_city("X", {}, det, clf.spec, clf.weights, 300, {}, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("classify_frame labels the planted pattern") {
  const HappyClassifier clf;
  const GrayImage frame = testutil::planted_frame(128, 96, 40, 24);
  const auto labels = classify_frame(frame, testutil::trained_cross_detector(), clf.spec,
                                     clf.weights, DetectorParams{});
  REQUIRE(labels.size() == 1);
  CHECK(labels[0] == EmotionLabel::Happy);

  // Three planted frames -> counts{Happy: 3}.
  const std::vector<GrayImage> frames(3, frame);
  const CityEmotionCounts r = process_city("Crossville", frames, testutil::trained_cross_detector(),
                                           clf.spec, clf.weights, 300);
  CHECK(r.faces_processed == 3);
  CHECK(r.counts[static_cast<int>(EmotionLabel::Happy)] == 3);
  for (const EmotionLabel other : kEmotionOrder) {
    if (other != EmotionLabel::Happy) CHECK(r.counts[static_cast<int>(other)] == 0);
  }
}

TEST_CASE("manifest parsing") {
  SECTION("full manifest with comments and whitespace") {
    const CensusManifest m = parse_manifest(
        "# census configuration\n"
        "\n"
        "city.New York.dir = frames/ny\n"
        "city.Paris.dir=frames/paris\n"
        "  max_faces = 120\n"
        "detector = models/det.hfd\n"
        "classifier = models/clf.spw\n"
        "scale = 1.5\n"
        "stride = 4\n"
        "nms_iou = 0.25\n"
        "threshold = 0.75\n");
    REQUIRE(m.cities.size() == 2);
    CHECK(m.cities[0] == CensusManifest::City{"New York", "frames/ny"});
    CHECK(m.cities[1] == CensusManifest::City{"Paris", "frames/paris"});
    CHECK(m.max_faces == 120);
    CHECK(m.detector == "models/det.hfd");
    CHECK(m.classifier == "models/clf.spw");
    CHECK(m.scale == 1.5);
    CHECK(m.stride == 4);
    CHECK(m.nms_iou == 0.25);
    REQUIRE(m.threshold.has_value());
    CHECK(*m.threshold == 0.75);
  }

  SECTION("defaults apply when keys are omitted") {
    const CensusManifest m = parse_manifest("city.Lyon.dir=lyon\n");
    CHECK(m.max_faces == 300);
    CHECK(m.scale == 1.2);
    CHECK(m.stride == 8);
    CHECK(m.nms_iou == 0.3);
    CHECK_FALSE(m.threshold.has_value());
    CHECK(m.detector.empty());
  }

  SECTION("empty manifest parses to defaults") {
    CHECK(parse_manifest("").cities.empty());
    CHECK(parse_manifest("# only a comment\n").cities.empty());
  }

  SECTION("errors") {
    CHECK_THROWS_WITH(parse_manifest("just some text\n"),
                      Catch::Matchers::ContainsSubstring("expected key=value"));
    CHECK_THROWS_WITH(parse_manifest("city.A.dir=x\ncity.A.dir=y\n"),
                      Catch::Matchers::ContainsSubstring("duplicate city A"));
    CHECK_THROWS_WITH(parse_manifest("wat=1\n"),
                      Catch::Matchers::ContainsSubstring("unknown key \"wat\""));
    CHECK_THROWS_WITH(parse_manifest("max_faces=0\n"),
                      Catch::Matchers::ContainsSubstring("max_faces must be >= 1"));
    CHECK_THROWS_WITH(parse_manifest("max_faces=abc\n"),
                      Catch::Matchers::ContainsSubstring("bad integer value for max_faces"));
    CHECK_THROWS_WITH(parse_manifest("scale=fast\n"),
                      Catch::Matchers::ContainsSubstring("bad numeric value for scale"));
    CHECK_THROWS_WITH(parse_manifest("city..dir=x\n"),
                      Catch::Matchers::ContainsSubstring("unknown key"));
  }
}
