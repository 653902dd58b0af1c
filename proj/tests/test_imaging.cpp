#include <doctest.h>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "rfrel/imaging.hpp"
#include "rfrel/stats.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace rfrel;
using rfrel::testing::TempDir;

namespace {

std::vector<Sample> uniform_samples(std::size_t n, const Extent& e, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> ui(static_cast<float>(e.i_min), static_cast<float>(e.i_max));
  std::uniform_real_distribution<float> uq(static_cast<float>(e.q_min), static_cast<float>(e.q_max));
  std::vector<Sample> s(n);
  for (auto& v : s) v = {ui(rng), uq(rng)};
  return s;
}

ExtentPolicy fixed(double a) {
  ExtentPolicy p;
  p.kind = ExtentPolicy::Kind::fixed;
  p.half_width = a;
  return p;
}

}  // namespace

TEST_CASE("iq_to_image: point mass at the center") {
  const auto img = iq_to_image(std::vector<Sample>(5, Sample{0.0f, 0.0f}), Extent::symmetric(1.0));
  CHECK(img.total() == 5);
  CHECK(std::count(img.counts.begin(), img.counts.end(), 0u) == kTileGrid * kTileGrid - 1);
  CHECK(*std::max_element(img.counts.begin(), img.counts.end()) == 5);
}

TEST_CASE("iq_to_image: corners follow the edge-inclusion rule") {
  const Extent e{-2.0, 3.0, -1.0, 0.5};
  const auto img = iq_to_image(std::vector<Sample>{{-2.0f, -1.0f}, {3.0f, 0.5f}}, e);
  CHECK(img.at(223, 0) == 1);
  CHECK(img.at(0, 223) == 1);
  CHECK(img.total() == 2);
}

TEST_CASE("iq_to_image: samples outside the extent are dropped") {
  const auto img = iq_to_image(std::vector<Sample>{{1.5f, 0.0f}, {0.0f, -1.01f}, {0.0f, 0.0f}}, Extent::symmetric(1.0));
  CHECK(img.total() == 1);
}

TEST_CASE("iq_to_image: degenerate extent and empty segment") {
  const std::vector<Sample> one{{0.0f, 0.0f}};
  CHECK_THROWS_AS(iq_to_image(one, Extent{0.0, 0.0, -1.0, 1.0}), ArgumentError);
  CHECK_THROWS_AS(iq_to_image(one, Extent{-1.0, 1.0, 2.0, 2.0}), ArgumentError);
  CHECK_THROWS_AS(iq_to_image({}, Extent::symmetric(1.0)), ArgumentError);
}

TEST_CASE("iq_to_image matches the brute-force binning oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Extent e{-1.3 + 0.01 * trial, 1.1, -0.7, 0.9 + 0.05 * trial};
    auto s = uniform_samples(10000, e, rng);
    // Exact edge values and the extreme corners.
    s.push_back({static_cast<float>(bin_edge(e.i_min, e.i_max, 17)), static_cast<float>(bin_edge(e.q_min, e.q_max, 200))});
    s.push_back({static_cast<float>(e.i_max), static_cast<float>(e.q_min)});
    CHECK(iq_to_image(s, e).counts == oracle::bin(s, e));
  }
}

TEST_CASE("property: permutation and power-of-two scaling leave counts unchanged") {
  std::mt19937_64 rng(12);
  const Extent e = Extent::symmetric(1.25);
  for (int trial = 0; trial < 5; ++trial) {
    auto s = uniform_samples(3000, Extent::symmetric(1.4), rng);
    const auto base = iq_to_image(s, e).counts;
    std::shuffle(s.begin(), s.end(), rng);
    CHECK(iq_to_image(s, e).counts == base);
    for (float f : {0.25f, 2.0f, 8.0f}) {
      std::vector<Sample> scaled(s.size());
      std::transform(s.begin(), s.end(), scaled.begin(), [f](Sample v) { return v * f; });
      CHECK(iq_to_image(scaled, Extent::symmetric(1.25 * f)).counts == base);
    }
  }
}

TEST_CASE("measurement_extent: type-7 percentile of max(|I|,|Q|)") {
  std::vector<Sample> s;
  std::vector<double> radius;
  std::mt19937_64 rng(8);
  std::normal_distribution<float> normal;
  for (int i = 0; i < 5000; ++i) {
    s.push_back({normal(rng), normal(rng)});
    radius.push_back(std::max(std::abs(s.back().real()), std::abs(s.back().imag())));
  }
  std::sort(radius.begin(), radius.end());
  const auto e = measurement_extent(s, {});
  CHECK(e.i_max == doctest::Approx(quantile_sorted(radius, 0.999)).epsilon(1e-12));
  CHECK(e.i_min == -e.i_max);
  CHECK(e.q_max == e.i_max);
  CHECK(measurement_extent(s, fixed(2.0)) == Extent::symmetric(2.0));
  CHECK_THROWS_AS(measurement_extent(std::vector<Sample>(10, Sample{}), {}), ArgumentError);
}

TEST_CASE("segment_measurement: partition into consecutive segments") {
  const std::vector<Sample> s{{0.1f, 0.1f}, {0.2f, 0.1f}, {0.3f, 0.1f}, {0.4f, 0.1f},
                              {-0.1f, 0.1f}, {-0.2f, 0.1f}, {-0.3f, 0.1f}, {-0.4f, 0.1f}};
  const auto imgs = segment_measurement(s, 4, 2, fixed(1.0), {3, 7, 0});
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].total() == 4);
  CHECK(imgs[1].total() == 4);
  CHECK(imgs[1].source.segment_index == 1);
  CHECK(imgs[1].source.transmitter_id == 3);
  CHECK(imgs[0].counts == iq_to_image(std::span(s).first(4), Extent::symmetric(1.0)).counts);
  CHECK(imgs[1].counts == iq_to_image(std::span(s).subspan(4), Extent::symmetric(1.0)).counts);
}

TEST_CASE("segment_measurement: insufficient samples report required vs available") {
  try {
    (void)segment_measurement(std::vector<Sample>(7, Sample{0.5f, 0.5f}), 4, 2);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("required 8") != std::string::npos);
    CHECK(msg.find("available 7") != std::string::npos);
  }
}

TEST_CASE("segment_measurement: desk and full-scale profiles") {
  std::mt19937_64 rng(21);
  std::normal_distribution<float> normal(0.0f, 0.3f);
  SUBCASE("desk: 100 x 10^4") {
    std::vector<Sample> s(1000000);
    for (auto& v : s) v = {normal(rng), normal(rng)};
    const auto imgs = segment_measurement(s, 10000, 100);
    REQUIRE(imgs.size() == 100);
    for (const auto& img : imgs) CHECK(img.total() <= 10000);
  }
  SUBCASE("full-scale: 500 x 10^5") {
    std::vector<Sample> s(50000000);
    std::uint64_t x = 88172645463325252ull;
    for (auto& v : s) {  // xorshift keeps this fast
      x ^= x << 13; x ^= x >> 7; x ^= x << 17;
      v = {static_cast<float>(static_cast<std::int32_t>(x) / 2147483648.0),
           static_cast<float>(static_cast<std::int32_t>(x >> 32) / 2147483648.0)};
    }
    const auto imgs = segment_measurement(s, 100000, 500);
    REQUIRE(imgs.size() == 500);
    for (const auto& img : imgs) CHECK(img.total() <= 100000);
  }
}

TEST_CASE("segment_measurement: parallel kernel equals the serial reference") {
  std::mt19937_64 rng(31);
  const auto s = uniform_samples(64 * 3000, Extent::symmetric(1.0), rng);
  const auto par = segment_measurement(s, 3000, 64, {}, {}, 4);
  const auto ser = segment_measurement_serial(s, 3000, 64);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].counts == ser[i].counts);
    CHECK(par[i].extent == ser[i].extent);
  }
}

TEST_CASE("grayscale_pixels: log normalization anchors") {
  TileImage img;
  CHECK(std::all_of(grayscale_pixels(img).begin(), grayscale_pixels(img).end(), [](auto p) { return p == 0; }));

  img.counts[1234] = 100;
  auto px = grayscale_pixels(img);
  CHECK(px[1234] == 255);
  CHECK(std::count(px.begin(), px.end(), 0) == kTileGrid * kTileGrid - 1);

  TileImage two;
  two.counts[10] = 9;
  two.counts[20] = 99;
  px = grayscale_pixels(two);
  CHECK(px[10] == static_cast<std::uint8_t>(std::lround(255.0 * std::log1p(9.0) / std::log1p(99.0))));
  CHECK(px[10] == 128);
  CHECK(px[20] == 255);
}

TEST_CASE("export_png writes a decodable 224x224 image") {
  TempDir dir("png");
  TileImage img;
  img.counts[5 * kTileGrid + 7] = 9;
  img.counts[100] = 99;
  for (int channels : {1, 3}) {
    const auto path = dir / ("img" + std::to_string(channels) + ".png");
    export_png(img, path, channels);
    png_image decoded{};
    decoded.version = PNG_IMAGE_VERSION;
    REQUIRE(png_image_begin_read_from_file(&decoded, path.c_str()) != 0);
    CHECK(decoded.width == 224);
    CHECK(decoded.height == 224);
    decoded.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(decoded));
    REQUIRE(png_image_finish_read(&decoded, nullptr, buf.data(), 0, nullptr) != 0);
    CHECK(buf == grayscale_pixels(img));
  }
  CHECK_THROWS_AS(export_png(img, dir / "bad.png", 2), ArgumentError);
}

TEST_CASE("export_csv writes 224 rows of 224 values") {
  TempDir dir("csv");
  TileImage img;
  img.counts[kTileGrid + 2] = 42;
  export_csv(img, dir / "g.csv");
  std::ifstream in(dir / "g.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == kTileGrid - 1);
    if (rows == 1) CHECK(line.rfind("0,0,42,", 0) == 0);
    ++rows;
  }
  CHECK(rows == kTileGrid);
}
