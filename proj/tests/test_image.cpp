#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "streetpulse/image.hpp"
#include "streetpulse/rng.hpp"

using namespace streetpulse;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& header,
                                   const std::vector<std::uint8_t>& payload = {}) {
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace

TEST_CASE("load_pnm decodes a minimal P5 graymap") {
  const auto img = load_pnm(bytes_of("P5 2 2 255 ", {0, 64, 128, 255}));
  const auto& g = std::get<GrayImage>(img);
  REQUIRE(g.width == 2);
  REQUIRE(g.height == 2);
  REQUIRE(g.pixels == std::vector<std::uint8_t>{0, 64, 128, 255});
  CHECK(g.at(0, 0) == 0);
  CHECK(g.at(1, 1) == 255);
}

TEST_CASE("load_pnm accepts comments and mixed whitespace in the header") {
  const auto img = load_pnm(bytes_of("P5\n# a comment\n2 # inline\n\t2\n255\n", {9, 8, 7, 6}));
  const auto& g = std::get<GrayImage>(img);
  CHECK(g.width == 2);
  CHECK(g.height == 2);
  CHECK(g.pixels == std::vector<std::uint8_t>{9, 8, 7, 6});
}

TEST_CASE("load_pnm decodes P6 pixmaps") {
  const auto img = load_pnm(bytes_of("P6 1 2 255 ", {255, 0, 0, 0, 0, 255}));
  const auto& rgb = std::get<RgbImage>(img);
  REQUIRE(rgb.width == 1);
  REQUIRE(rgb.height == 2);
  REQUIRE(rgb.pixels.size() == 6);
  CHECK(rgb.pixels[0] == 255);
  CHECK(rgb.pixels[5] == 255);
}

TEST_CASE("load_pnm rejects bad input") {
  CHECK_THROWS_WITH(load_pnm(bytes_of("P7 1 1 255 ", {0})),
                    Catch::Matchers::ContainsSubstring("magic"));
  CHECK_THROWS_WITH(load_pnm(bytes_of("P5 1 1 254 ", {0})),
                    Catch::Matchers::ContainsSubstring("maxval"));
  CHECK_THROWS_WITH(load_pnm(bytes_of("P5 1 1 65535 ", {0, 0})),
                    Catch::Matchers::ContainsSubstring("maxval"));
  CHECK_THROWS_WITH(load_pnm(bytes_of("P5 1 1 255 ")),
                    Catch::Matchers::ContainsSubstring("truncated"));
  CHECK_THROWS_WITH(load_pnm(bytes_of("P5 2 2 255 ", {1, 2, 3})),
                    Catch::Matchers::ContainsSubstring("truncated"));
  CHECK_THROWS_WITH(load_pnm(bytes_of("P5 99999999999 1 255 ")),
                    Catch::Matchers::ContainsSubstring("overflow"));
  CHECK_THROWS_WITH(load_pnm(bytes_of("P5 -1 1 255 ", {0})),
                    Catch::Matchers::ContainsSubstring("non-numeric"));
  CHECK_THROWS_WITH(load_pnm(bytes_of("P5 0 1 255 ")),
                    Catch::Matchers::ContainsSubstring("zero header dimension"));
  CHECK_THROWS(load_pnm(bytes_of("")));
}

TEST_CASE("save_pgm emits the exact canonical header") {
  GrayImage one{1, 1, {0}};
  const std::vector<std::uint8_t> expect_one = bytes_of("P5\n1 1\n255\n", {0});
  CHECK(save_pgm(one) == expect_one);

  GrayImage two{2, 2, {0, 64, 128, 255}};
  const std::vector<std::uint8_t> out = save_pgm(two);
  REQUIRE(out.size() == 15);  // 11-byte header plus the 4 pixel bytes
  CHECK(out == bytes_of("P5\n2 2\n255\n", {0, 64, 128, 255}));
}

TEST_CASE("pgm round trip is identity on random images") {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    GrayImage img;
    img.width = 1 + static_cast<int>(rng.below(17));
    img.height = 1 + static_cast<int>(rng.below(13));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    const auto round = load_pnm(save_pgm(img));
    REQUIRE(std::get<GrayImage>(round) == img);
  }
}

TEST_CASE("to_grayscale uses the BT.601 weights, rounded") {
  RgbImage img{4, 1, {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 200, 30}};
  const GrayImage g = to_grayscale(img);
  REQUIRE(g.width == 4);
  REQUIRE(g.height == 1);
  CHECK(g.pixels == std::vector<std::uint8_t>{76, 150, 29, 124});
}

TEST_CASE("resize_bilinear interpolates with align-corners sampling") {
  GrayImage row{2, 1, {0, 255}};
  const GrayImage wide = resize_bilinear(row, 4, 1);
  CHECK(wide.pixels == std::vector<std::uint8_t>{0, 85, 170, 255});

  GrayImage img{2, 2, {10, 20, 30, 40}};
  CHECK(resize_bilinear(img, 2, 2) == img);
  CHECK(resize_bilinear(img, 1, 1).pixels == std::vector<std::uint8_t>{10});

  CHECK_THROWS_AS(resize_bilinear(img, 0, 2), std::invalid_argument);
}

TEST_CASE("resize_bilinear endpoints match source corners") {
  SeededRng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    GrayImage img;
    img.width = 2 + static_cast<int>(rng.below(30));
    img.height = 2 + static_cast<int>(rng.below(30));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    const int ow = 2 + static_cast<int>(rng.below(40));
    const int oh = 2 + static_cast<int>(rng.below(40));
    const GrayImage out = resize_bilinear(img, ow, oh);
    CHECK(out.at(0, 0) == img.at(0, 0));
    CHECK(out.at(ow - 1, 0) == img.at(img.width - 1, 0));
    CHECK(out.at(0, oh - 1) == img.at(0, img.height - 1));
    CHECK(out.at(ow - 1, oh - 1) == img.at(img.width - 1, img.height - 1));
  }
}

TEST_CASE("crop clips against the image bounds") {
  GrayImage img{4, 3, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};

  const GrayImage inner = crop(img, 1, 1, 2, 2);
  CHECK(inner.width == 2);
  CHECK(inner.height == 2);
  CHECK(inner.pixels == std::vector<std::uint8_t>{5, 6, 9, 10});

  // Overhanging boxes clip to the intersection.
  const GrayImage corner = crop(img, 3, 2, 5, 5);
  CHECK(corner.width == 1);
  CHECK(corner.height == 1);
  CHECK(corner.pixels == std::vector<std::uint8_t>{11});

  const GrayImage neg = crop(img, -2, -1, 4, 3);
  CHECK(neg.width == 2);
  CHECK(neg.height == 2);
  CHECK(neg.pixels == std::vector<std::uint8_t>{0, 1, 4, 5});

  CHECK_THROWS_AS(crop(img, 0, 0, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(crop(img, 10, 10, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(crop(img, -5, 0, 3, 3), std::invalid_argument);
}
