#include "doctest.h"

#include <cmath>
#include <string>

#include "deepagent/errors.hpp"
#include "deepagent/vision/frame.hpp"

using namespace deepagent;
using namespace deepagent::vision;

namespace {

io::Bytes bytes_of(const std::string& header, std::initializer_list<int> payload) {
  io::Bytes b(header.begin(), header.end());
  for (int v : payload) b.push_back(static_cast<std::uint8_t>(v));
  return b;
}

Frame random_frame(int w, int h, int c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Frame f(w, h, c);
  for (Eigen::Index i = 0; i < f.pixels.size(); ++i) f.pixels[i] = rng.uniform() * scale;
  return f;
}

// Straight transcription of half-pixel bilinear sampling, one pixel at a time.
double naive_bilinear(const Frame& f, int out_w, int out_h, int x, int y, int c) {
  double u = (x + 0.5) * f.width / out_w - 0.5;
  double v = (y + 0.5) * f.height / out_h - 0.5;
  if (u < 0) u = 0;
  if (v < 0) v = 0;
  if (u > f.width - 1) u = f.width - 1;
  if (v > f.height - 1) v = f.height - 1;
  const int i = static_cast<int>(std::floor(u)), j = static_cast<int>(std::floor(v));
  const int i2 = i + 1 < f.width ? i + 1 : i, j2 = j + 1 < f.height ? j + 1 : j;
  const double a = u - i, b = v - j;
  return (1 - a) * (1 - b) * f.at(i, j, c) + a * (1 - b) * f.at(i2, j, c) + (1 - a) * b * f.at(i, j2, c) +
         a * b * f.at(i2, j2, c);
}

}  // namespace

TEST_CASE("load_frame") {
  const Frame gray = parse_pnm(bytes_of("P5\n2 2\n255\n", {0, 128, 255, 64}));
  CHECK(gray.width == 2);
  CHECK(gray.height == 2);
  CHECK(gray.channels == 1);
  CHECK(gray.pixels[0] == 0);
  CHECK(gray.pixels[1] == 128);
  CHECK(gray.pixels[2] == 255);
  CHECK(gray.pixels[3] == 64);

  const Frame rgb = parse_pnm(bytes_of("P6\n# comment line\n1 1\n255\n", {255, 0, 0}));
  CHECK(rgb.channels == 3);
  CHECK(rgb.at(0, 0, 0) == 255);
  CHECK(rgb.at(0, 0, 1) == 0);
  CHECK(rgb.at(0, 0, 2) == 0);

  CHECK_THROWS_AS(parse_pnm(bytes_of("P5\n1 1\n65535\n", {0, 0})), IngestionError);
  CHECK_THROWS_AS(parse_pnm(bytes_of("P3\n1 1\n255\n", {0})), IngestionError);
  CHECK_THROWS_AS(parse_pnm(bytes_of("P5\n2 2\n255\n", {1, 2})), IngestionError);
  try {
    parse_pnm(bytes_of("P5\nx 2\n255\n", {}), "frames/a.pgm");
    FAIL("expected ingestion error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("frames/a.pgm") != std::string::npos);
  }

  SUBCASE("encode round trip") {
    Frame f(3, 2, 3);
    for (Eigen::Index i = 0; i < f.pixels.size(); ++i) f.pixels[i] = static_cast<double>(i * 13 % 256);
    CHECK(parse_pnm(encode_pnm(f)) == f);
  }
}

TEST_CASE("grayscale") {
  auto px = [](double r, double g, double b) {
    Frame f(1, 1, 3);
    f.pixels << r, g, b;
    return grayscale(f).pixels[0];
  };
  CHECK(px(255, 255, 255) == doctest::Approx(255.0).epsilon(1e-12));
  CHECK(px(255, 0, 0) == doctest::Approx(76.245).epsilon(1e-12));
  CHECK(px(0, 0, 0) == 0.0);

  const Frame g = random_frame(4, 4, 1, 3, 255.0);
  CHECK(grayscale(g) == g);

  const Frame rgb = random_frame(9, 7, 3, 4, 255.0);
  const Frame out = grayscale(rgb);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x) {
      const double lo = std::min({rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2)});
      const double hi = std::max({rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2)});
      CHECK(out.at(x, y, 0) >= lo - 1e-12);
      CHECK(out.at(x, y, 0) <= hi + 1e-12);
    }
}

TEST_CASE("resize_bilinear") {
  const Frame same = random_frame(224, 224, 3, 5, 255.0);
  CHECK(resize_bilinear(same, 224, 224) == same);

  const Frame flat(13, 7, 3, 42.0);
  const Frame big = resize_bilinear(flat, 224, 224);
  CHECK(big.width == 224);
  CHECK(big.height == 224);
  CHECK((big.pixels - 42.0).abs().maxCoeff() < 1e-12);

  Frame checker(2, 2, 1);
  checker.pixels << 0, 255, 255, 0;
  const Frame up = resize_bilinear(checker, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(std::abs(up.at(x, y, 0) - naive_bilinear(checker, 4, 4, x, y, 0)) < 1e-9);
  CHECK(up.at(1, 1, 0) == doctest::Approx(255.0 * 0.375));

  const Frame src = random_frame(17, 11, 3, 6, 255.0);
  const Frame down = resize_bilinear(src, 5, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) CHECK(std::abs(down.at(x, y, c) - naive_bilinear(src, 5, 9, x, y, c)) < 1e-9);

  const Frame dot(1, 1, 1, 9.0);
  CHECK((resize_bilinear(dot, 3, 3).pixels == 9.0).all());
}

TEST_CASE("normalize") {
  Frame f(3, 1, 1);
  f.pixels << 255, 0, 128;
  const Frame n = normalize(f);
  CHECK(n.pixels[0] == 1.0);
  CHECK(n.pixels[1] == 0.0);
  CHECK(n.pixels[2] == doctest::Approx(0.50196).epsilon(1e-5));

  Frame all(256, 1, 1);
  for (int i = 0; i < 256; ++i) all.pixels[i] = i;
  const Frame scaled = normalize(all);
  for (int i = 1; i < 256; ++i) CHECK(scaled.pixels[i - 1] < scaled.pixels[i]);
}

TEST_CASE("frame sampling") {
  CHECK(sample_interval(20) == std::vector<int>{0, 5, 10, 15});
  CHECK(sample_interval(3) == std::vector<int>{0});
  CHECK(sample_interval(100).size() == 20);

  CHECK(sample_even(5, 10) == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(sample_even(100, 10) == std::vector<int>{0, 11, 22, 33, 44, 55, 66, 77, 88, 99});
  CHECK(sample_even(1, 7) == std::vector<int>{0});

  for (int n = 1; n <= 60; ++n)
    for (int m = 1; m <= 12; ++m) {
      const auto idx = sample_even(n, m);
      CHECK(!idx.empty());
      CHECK(static_cast<int>(idx.size()) <= m);
      for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i - 1] < idx[i]);
      CHECK(idx.front() == 0);
      if (n > 1 && m >= 2) CHECK(idx.back() == n - 1);
    }
}

TEST_CASE("augment") {
  const Frame f = random_frame(20, 16, 3, 8);

  Rng rng(1);
  CHECK(augment(f, AugmentPolicy::identity(), rng) == f);

  Frame symmetric(6, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 3; ++x) symmetric.at(x, y, 0) = symmetric.at(5 - x, y, 0) = 0.1 * (x + 4 * y);
  AugmentPolicy flip_only = AugmentPolicy::identity();
  flip_only.horizontal_flip = true;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Rng r(seed);
    CHECK(augment(symmetric, flip_only, r) == symmetric);
  }

  SUBCASE("flip-only policy mirrors or leaves the frame") {
    int flipped = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng r(seed);
      const Frame out = augment(f, flip_only, r);
      if (!(out == f)) {
        ++flipped;
        CHECK(out.at(0, 3, 1) == f.at(19, 3, 1));
      }
    }
    CHECK(flipped > 60);
    CHECK(flipped < 140);
  }

  SUBCASE("seeded runs agree and stay in range") {
    const AugmentPolicy policy;
    Rng a(77), b(77);
    const Frame x = augment(f, policy, a);
    const Frame y = augment(f, policy, b);
    CHECK(x == y);
    CHECK(x.pixels.minCoeff() >= 0.0);
    CHECK(x.pixels.maxCoeff() <= 1.0);
    CHECK(!(x == f));
  }

  SUBCASE("constant frame survives geometric stages") {
    AugmentPolicy geometric;
    geometric.brightness_min = geometric.brightness_max = 1.0;
    const Frame flat(10, 10, 3, 0.4);
    Rng r(3);
    CHECK((augment(flat, geometric, r).pixels - 0.4).abs().maxCoeff() < 1e-12);
  }

  AugmentPolicy bad;
  bad.rotation_deg = 30;
  CHECK_THROWS_AS(augment(f, bad, rng), ConfigError);
}
