#include "forge/diffuse_guess.hpp"

#include "forge/bench.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace forge;
using forge::test::close_rel;

namespace {

LdrImage<double> ldr(const Tensor<double>& t) { return LdrImage<double>::make(t); }

Tensor<double> constant_rgb(int h, int w, double r, double g, double b) {
  Tensor<double> t(3, h, w);
  t.plane(0).setConstant(r);
  t.plane(1).setConstant(g);
  t.plane(2).setConstant(b);
  return t;
}

/// Glossy flat material under a close light, rendered overexposed: a strong
/// centered highlight on a stationary (here constant) background.
LdrImage<double> highlight_photo(int n) {
  auto maps = SvbrdfMaps<double>::flat(n, n, Vec3<double>(0.35, 0.3, 0.25), 0.04, 0.45);
  SceneConfig<double> scene = SceneConfig<double>::canonical();
  scene.light_height = 0.8;
  scene.light_intensity *= scene.light_height * scene.light_height / 4.0;
  auto lin = render(maps, scene);
  lin.rgb.vec() *= 2.0;  // overexpose
  return tonemap(lin, kGamma);
}

double disk_ring_ratio(const Tensor<double>& rgb) {
  const Tensor<double> lum = luminance(rgb);
  const int h = lum.rows();
  const double cy = (h - 1) / 2.0, cx = (h - 1) / 2.0;
  double disk = 0, ring = 0;
  long nd = 0, nr = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < h; ++x) {
      const double r = std::hypot(y - cy, x - cx);
      if (r <= h / 8.0) {
        disk += lum(0, y, x);
        ++nd;
      } else if (r >= 3.0 * h / 8.0 && r <= h / 2.0) {
        ring += lum(0, y, x);
        ++nr;
      }
    }
  return (disk / nd) / (ring / nr);
}

/// Low-frequency energy fraction recomputed with the direct DFT oracle.
double score_oracle(const Tensor<double>& rgb) {
  const Tensor<double> lum = rgb.channels() == 1 ? rgb : luminance(rgb);
  auto f = forge::test::dft2_oracle(lum.plane(0));
  const int h = static_cast<int>(f.rows()), w = static_cast<int>(f.cols());
  double low = 0, total = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (y == 0 && x == 0) continue;
      const double e = std::norm(f(y, x));
      total += e;
      if (std::min(y, h - y) <= h / 32 && std::min(x, w - x) <= w / 32) low += e;
    }
  return total > 0 ? low / total : 0.0;
}

}  // namespace

TEST_CASE("estimate_illumination: blur of a constant image is that constant") {
  const auto photo = ldr(constant_rgb(32, 32, 0.2, 0.5, 0.8));
  const auto field = estimate_illumination(photo, 4.0);
  const double want = 0.2126 * 0.2 + 0.7152 * 0.5 + 0.0722 * 0.8;
  CHECK((field.plane(0) - want).abs().maxCoeff() < 1e-9);
}

TEST_CASE("estimate_illumination: single bright pixel gives a decaying bump") {
  Tensor<double> t(3, 33, 33);
  for (int c = 0; c < 3; ++c) t(c, 16, 16) = 1.0;
  const auto field = estimate_illumination(ldr(t), 3.0);
  double best = -1;
  int by = -1, bx = -1;
  for (int y = 0; y < 33; ++y)
    for (int x = 0; x < 33; ++x)
      if (field(0, y, x) > best) {
        best = field(0, y, x);
        by = y;
        bx = x;
      }
  CHECK(by == 16);
  CHECK(bx == 16);
  CHECK(field(0, 16, 18) > field(0, 16, 22));
  CHECK(field(0, 16, 22) > field(0, 16, 28));
}

TEST_CASE("estimate_illumination matches a dense convolution oracle at 64x64") {
  std::mt19937_64 rng(149);
  const auto photo = ldr(forge::test::random_tensor(3, 64, 64, rng));
  const double sigma = 16.0;  // H/4
  const auto got = estimate_illumination(photo, sigma);

  // Dense 2-D convolution with an independently built kernel, mirror padding
  // with the edge pixel included.
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k1(2 * radius + 1);
  double ksum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k1[i + radius] = std::exp(-i * i / (2.0 * sigma * sigma));
    ksum += k1[i + radius];
  }
  for (auto& v : k1) v /= ksum;
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - i - 1;
    }
    return i;
  };
  const Tensor<double> lum = luminance(photo.rgb);
  double max_err = 0;
  for (int y = 0; y < 64; y += 7)
    for (int x = 0; x < 64; x += 7) {
      double acc = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          acc += k1[dy + radius] * k1[dx + radius] * lum(0, mirror(y + dy, 64), mirror(x + dx, 64));
      max_err = std::max(max_err, std::abs(acc - got(0, y, x)));
    }
  CHECK(max_err < 1e-10);
}

TEST_CASE("guess_diffuse: uniform mid-gray passes through with score 0") {
  const auto photo = ldr(constant_rgb(32, 32, 0.5, 0.5, 0.5));
  const auto g = guess_diffuse(photo);
  CHECK((g.map.vec() - photo.rgb.vec()).abs().maxCoeff() < 1e-9);
  CHECK(g.score == 0.0);
}

TEST_CASE("guess_diffuse: flattens the centered highlight of a flat material") {
  const auto photo = highlight_photo(128);
  const double raw_ratio = disk_ring_ratio(photo.rgb);
  CHECK(raw_ratio > 1.5);
  // A close flash falls off steeply; track it at sigma = H/16 (the default
  // H/8 only removes whole-image-scale illumination).
  const auto g = guess_diffuse(photo, 128.0 / 16.0);
  const double guessed_ratio = disk_ring_ratio(g.map);
  CHECK(guessed_ratio > 0.9);
  CHECK(guessed_ratio < 1.1);
}

TEST_CASE("guess_diffuse: lowers the stationarity score of a lit checkerboard") {
  // Checker texture modulated by the highlight of a glossy render.
  const int n = 64;
  const auto lit = highlight_photo(n);
  Tensor<double> t(3, n, n);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double check = ((x / 8 + y / 8) % 2) ? 0.9 : 0.55;
        t(c, y, x) = std::min(1.0, check * lit.rgb(c, y, x) * 1.6);
      }
  const auto photo = ldr(t);
  const auto g = guess_diffuse(photo);
  const double in_score = score_oracle(photo.rgb);
  const double out_score = score_oracle(g.map);
  CHECK(close_rel(stationarity_score(g.map), out_score, 1e-9));
  CHECK(out_score < in_score);
  CHECK(g.score == doctest::Approx(out_score).epsilon(1e-9));
}

TEST_CASE("guess_diffuse: fully black image is rejected") {
  Tensor<double> t(3, 16, 16);
  CHECK_THROWS_WITH_AS(guess_diffuse(ldr(t)), "degenerate input: zero luminance",
                       std::runtime_error);
}

TEST_CASE("guess_diffuse: idempotent within tolerance") {
  const auto photo = highlight_photo(96);
  const auto once = guess_diffuse(photo);
  const auto twice = guess_diffuse(ldr(once.map));
  CHECK((twice.map.vec() - once.map.vec()).abs().mean() < 0.02);
}

TEST_CASE("guess_diffuse: output stays in [0,1] on random inputs") {
  std::mt19937_64 rng(151);
  for (int i = 0; i < 5; ++i) {
    const auto photo = ldr(forge::test::random_tensor(3, 48, 48, rng, 0.01, 1.0));
    const auto g = guess_diffuse(photo);
    CHECK((g.map.vec() >= 0.0).all());
    CHECK((g.map.vec() <= 1.0).all());
  }
}

TEST_CASE("guess_diffuse: invariant to global exposure scaling") {
  // Values stay below 1/1.5 so the k-scaling never clips.
  const int n = 64;
  Tensor<double> t(3, n, n);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double tex = 0.25 + 0.1 * std::sin(2.0 * std::numbers::pi * x / 16.0) *
                                      std::cos(2.0 * std::numbers::pi * y / 16.0);
        const double falloff = 1.0 + 0.5 * std::exp(-((y - 32.0) * (y - 32.0) +
                                                      (x - 32.0) * (x - 32.0)) / 300.0);
        t(c, y, x) = std::min(0.66, tex * falloff);
      }
  const auto base = guess_diffuse(ldr(t));
  for (const double k : {0.5, 1.5}) {
    Tensor<double> scaled = t;
    scaled.vec() *= k;
    const auto g = guess_diffuse(ldr(scaled));
    CHECK((g.map.vec() - base.map.vec()).abs().mean() < 0.05);
  }
}
