#include "forge/material.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace forge;
using forge::test::close_rel;
using forge::test::random_tensor;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent scalar transcription of the three microfacet factors, kept
// deliberately separate from the implementation it checks.
double oracle_ndf(double nh, double a) {
  const double q = nh * nh * (a * a - 1.0) + 1.0;
  return a * a / (kPi * q * q);
}
double oracle_lambda(double mu, double a) {
  const double tan2 = (1.0 - mu * mu) / (mu * mu);
  return (std::sqrt(1.0 + a * a * tan2) - 1.0) / 2.0;
}
double oracle_fresnel(double f0, double hw) {
  return f0 + (1.0 - f0) * std::pow(1.0 - hw, 5.0);
}
Vec3<double> oracle_brdf(const Vec3<double>& wi, const Vec3<double>& wo,
                         const Vec3<double>& rho_d, double rho_s, double a,
                         const Vec3<double>& n) {
  const double mu_i = n.dot(wi), mu_o = n.dot(wo);
  if (mu_i <= 0.0 || mu_o <= 0.0) return Vec3<double>::Zero();
  const Vec3<double> h = (wi + wo).normalized();
  const double d = oracle_ndf(n.dot(h), a);
  const double f = oracle_fresnel(rho_s, h.dot(wo));
  const double g = 1.0 / (1.0 + oracle_lambda(mu_i, a) + oracle_lambda(mu_o, a));
  return rho_d / kPi + Vec3<double>::Constant(d * f * g / (4.0 * mu_i * mu_o));
}

SvbrdfMaps<double> random_maps(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SvbrdfMaps<double> m;
  m.diffuse = random_tensor(3, h, w, rng, 0.05, 0.95);
  m.specular = random_tensor(1, h, w, rng, 0.0, 0.3);
  m.roughness = random_tensor(1, h, w, rng, kAlphaMin, 1.0);
  m.normal = Tensor<double>(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Vec3<double> v(uni(rng) - 0.5, uni(rng) - 0.5, 0.5 + uni(rng));
      m.normal.set_pixel3(y, x, v.normalized());
    }
  return m;
}

}  // namespace

TEST_CASE("eval_brdf: pure diffuse at normal incidence") {
  const Vec3<double> z(0, 0, 1);
  const Vec3<double> f = eval_brdf<double>(z, z, Vec3<double>(0.5, 0.5, 0.5), 0.0, 0.5, z);
  for (int c = 0; c < 3; ++c) CHECK(f[c] == doctest::Approx(0.5 / kPi).epsilon(1e-12));
}

TEST_CASE("eval_brdf: specular-only normal incidence matches the factor oracle") {
  const Vec3<double> z(0, 0, 1);
  const Vec3<double> f = eval_brdf<double>(z, z, Vec3<double>::Zero(), 1.0, 1.0, z);
  // D(1) = 1/pi, F = 1, G = 1 -> spec = 1/(4 pi).
  const double expected = oracle_ndf(1.0, 1.0) * oracle_fresnel(1.0, 1.0) /
                          (1.0 + 2.0 * oracle_lambda(1.0, 1.0)) / 4.0;
  CHECK(expected == doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-12));
  for (int c = 0; c < 3; ++c) CHECK(f[c] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("eval_brdf: grazing and backfacing directions contribute zero") {
  const Vec3<double> z(0, 0, 1);
  const Vec3<double> grazing(1, 0, 0);
  CHECK(eval_brdf<double>(grazing, z, Vec3<double>(0.5, 0.5, 0.5), 0.5, 0.5, z).norm() == 0.0);
  const Vec3<double> below(0, 0.6, -0.8);
  CHECK(eval_brdf<double>(below, below, Vec3<double>(0.5, 0.5, 0.5), 0.5, 0.5, z).norm() == 0.0);
}

TEST_CASE("eval_brdf: random configurations match the oracle transcription") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    auto dir = [&] {
      Vec3<double> v(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) * 0.9 + 0.1);
      return v.normalized().eval();
    };
    const Vec3<double> wi = dir(), wo = dir(), n(0, 0, 1);
    const Vec3<double> rho_d(uni(rng), uni(rng), uni(rng));
    const double rho_s = uni(rng), a = kAlphaMin + uni(rng) * (1 - kAlphaMin);
    const Vec3<double> got = eval_brdf(wi, wo, rho_d, rho_s, a, n);
    const Vec3<double> want = oracle_brdf(wi, wo, rho_d, rho_s, a, n);
    for (int c = 0; c < 3; ++c) CHECK(close_rel(got[c], want[c], 1e-10));
  }
}

TEST_CASE("render: center pixel equals per-pixel closed form at odd resolution") {
  auto maps = SvbrdfMaps<double>::flat(65, 65, Vec3<double>(0.5, 0.5, 0.5), 0.04, 0.6);
  SceneConfig<double> scene;
  scene.plane_extent = 1;
  scene.light_height = 2;
  scene.light_intensity = 4;
  const auto img = render(maps, scene);
  const Vec3<double> z(0, 0, 1);
  const Vec3<double> f = oracle_brdf(z, z, Vec3<double>(0.5, 0.5, 0.5), 0.04, 0.6, z);
  const double expected = f[0] * scene.light_intensity / 4.0;  // d = 2, mu = 1
  for (int c = 0; c < 3; ++c) CHECK(close_rel(img.rgb(c, 32, 32), expected, 1e-9));
}

TEST_CASE("render: radial symmetry for flat homogeneous materials") {
  auto maps = SvbrdfMaps<double>::flat(64, 64, Vec3<double>(0.4, 0.5, 0.6), 0.1, 0.3);
  const auto img = render(maps, SceneConfig<double>::canonical());
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = img.rgb(c, y, x);
        CHECK(std::abs(img.rgb(c, y, 63 - x) - v) <= 1e-5 * std::max(1.0, std::abs(v)));
        CHECK(std::abs(img.rgb(c, 63 - y, x) - v) <= 1e-5 * std::max(1.0, std::abs(v)));
        CHECK(std::abs(img.rgb(c, x, y) - v) <= 1e-5 * std::max(1.0, std::abs(v)));
      }
}

TEST_CASE("render: linear in light intensity, exactly for power-of-two factors") {
  std::mt19937_64 rng(3);
  const auto maps = random_maps(16, 16, rng);
  SceneConfig<double> scene = SceneConfig<double>::canonical();
  const auto img1 = render(maps, scene);
  scene.light_intensity *= 2;
  const auto img2 = render(maps, scene);
  for (Eigen::Index i = 0; i < img1.rgb.size(); ++i)
    CHECK(img2.rgb.data()[i] == 2.0 * img1.rgb.data()[i]);
}

TEST_CASE("render: diffuse-only reduction to the Lambertian closed form") {
  std::mt19937_64 rng(11);
  auto maps = random_maps(32, 32, rng);
  maps.specular.vec().setZero();
  SceneConfig<double> scene = SceneConfig<double>::canonical();
  const auto img = render(maps, scene);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double py = scene.plane_extent * (2.0 * (y + 0.5) / 32 - 1.0);
      const double px = scene.plane_extent * (2.0 * (x + 0.5) / 32 - 1.0);
      const double d2 = px * px + py * py + scene.light_height * scene.light_height;
      const Vec3<double> l = Vec3<double>(-px, -py, scene.light_height) / std::sqrt(d2);
      const double mu = std::max(0.0, maps.normal.pixel3(y, x).dot(l));
      for (int c = 0; c < 3; ++c) {
        const double want = maps.diffuse(c, y, x) / kPi * scene.light_intensity / d2 * mu;
        CHECK(close_rel(img.rgb(c, y, x), want, 1e-6));
      }
    }
}

TEST_CASE("render: energy sanity over random maps") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto maps = random_maps(24, 24, rng);
    const auto img = render(maps, SceneConfig<double>::canonical());  // make() validates
    CHECK(all_finite(img.rgb));
    CHECK((img.rgb.vec() >= 0.0).all());
  }
}

TEST_CASE("render_backward matches central finite differences") {
  std::mt19937_64 rng(17);
  auto base_normals_raw = random_tensor(3, 12, 12, rng, -0.5, 0.5);
  base_normals_raw.plane(2) += 1.0;  // keep z well positive
  auto make_maps = [&](const Tensor<double>& diff, const Tensor<double>& spec,
                       const Tensor<double>& rough, const Tensor<double>& raw) {
    SvbrdfMaps<double> m;
    m.diffuse = diff;
    m.specular = spec;
    m.roughness = rough;
    m.normal = normalize_normals(raw);
    return m;
  };
  const auto diff0 = random_tensor(3, 12, 12, rng, 0.1, 0.9);
  const auto spec0 = random_tensor(1, 12, 12, rng, 0.05, 0.3);
  const auto rough0 = random_tensor(1, 12, 12, rng, 0.1, 0.9);
  const auto scene = SceneConfig<double>::canonical();

  auto objective = [&](const SvbrdfMaps<double>& m) { return mean(render(m, scene).rgb); };

  const auto maps0 = make_maps(diff0, spec0, rough0, base_normals_raw);
  Tensor<double> d_rad = Tensor<double>::constant(3, 12, 12, 1.0 / (3.0 * 12 * 12));
  const MapsGrad<double> grad = render_backward(maps0, scene, d_rad);
  const Tensor<double> grad_raw_normal = normalize_normals_backward(base_normals_raw, grad.normal);

  std::uniform_int_distribution<int> pix(0, 11), chan3(0, 2);
  auto check_param = [&](auto&& get_tensor, const Tensor<double>& analytic, int channels) {
    for (int k = 0; k < 5; ++k) {
      const int c = channels == 3 ? chan3(rng) : 0, y = pix(rng), x = pix(rng);
      auto f = [&](double v) {
        Tensor<double> diff = diff0, spec = spec0, rough = rough0, raw = base_normals_raw;
        get_tensor(diff, spec, rough, raw)(c, y, x) = v;
        return objective(make_maps(diff, spec, rough, raw));
      };
      const double x0 = [&] {
        Tensor<double> diff = diff0, spec = spec0, rough = rough0, raw = base_normals_raw;
        return get_tensor(diff, spec, rough, raw)(c, y, x);
      }();
      const double fd = forge::test::central_difference(f, x0, 1e-3);
      CHECK(close_rel(analytic(c, y, x), fd, 1e-3));
    }
  };
  using T4 = Tensor<double>;
  check_param([](T4& d, T4&, T4&, T4&) -> T4& { return d; }, grad.diffuse, 3);
  check_param([](T4&, T4& s, T4&, T4&) -> T4& { return s; }, grad.specular, 1);
  check_param([](T4&, T4&, T4& r, T4&) -> T4& { return r; }, grad.roughness, 1);
  check_param([](T4&, T4&, T4&, T4& n) -> T4& { return n; }, grad_raw_normal, 3);
}

TEST_CASE("tonemap: fixed points, analytic value, clipping, monotonicity") {
  Tensor<double> t(3, 1, 4);
  t(0, 0, 0) = 0.0;
  t(0, 0, 1) = 1.0;
  t(0, 0, 2) = 0.25;
  t(0, 0, 3) = 3.7;
  const auto ldr = tonemap(LinearImage<double>::make(t), 2.0);
  CHECK(ldr.rgb(0, 0, 0) == 0.0);
  CHECK(ldr.rgb(0, 0, 1) == 1.0);
  CHECK(ldr.rgb(0, 0, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ldr.rgb(0, 0, 3) == 1.0);

  std::mt19937_64 rng(5);
  const auto a = random_tensor(3, 8, 8, rng, 0.0, 2.0);
  Tensor<double> b = a;
  b.vec() += 0.1;
  const auto la = tonemap(LinearImage<double>::make(a), 2.2);
  const auto lb = tonemap(LinearImage<double>::make(b), 2.2);
  CHECK((lb.rgb.vec() >= la.rgb.vec()).all());
}

TEST_CASE("tonemap rejects non-positive gamma") {
  CHECK_THROWS(tonemap(LinearImage<double>::make(Tensor<double>(3, 2, 2)), 0.0));
}

TEST_CASE("tonemap_backward matches finite differences away from clips") {
  std::mt19937_64 rng(23);
  const auto lin = random_tensor(3, 6, 6, rng, 0.05, 0.95);
  const auto img = LinearImage<double>::make(lin);
  Tensor<double> upstream = random_tensor(3, 6, 6, rng, -1.0, 1.0);
  const auto grad = tonemap_backward(img, 2.2, upstream);
  std::uniform_int_distribution<int> pix(0, 5), chan(0, 2);
  for (int k = 0; k < 10; ++k) {
    const int c = chan(rng), y = pix(rng), x = pix(rng);
    auto f = [&](double v) {
      Tensor<double> t = lin;
      t(c, y, x) = v;
      const auto l = tonemap(LinearImage<double>::make(t), 2.2);
      return (l.rgb.vec() * upstream.vec()).sum();
    };
    const double fd = forge::test::central_difference(f, lin(c, y, x), 1e-5);
    CHECK(close_rel(grad(c, y, x), fd, 1e-4));
  }
}

TEST_CASE("normalize_normals: canonical examples and the degenerate rule") {
  Tensor<double> raw(3, 1, 3);
  raw.set_pixel3(0, 0, Vec3<double>(0, 0, 2));
  raw.set_pixel3(0, 1, Vec3<double>(3, 0, 4));
  raw.set_pixel3(0, 2, Vec3<double>(0, 0, 0));
  NormalizeStats stats;
  const auto n = normalize_normals(raw, &stats);
  CHECK(n.pixel3(0, 0) == Vec3<double>(0, 0, 1));
  CHECK(n.pixel3(0, 1).isApprox(Vec3<double>(0.6, 0, 0.8), 1e-12));
  CHECK(n.pixel3(0, 2) == Vec3<double>(0, 0, 1));
  CHECK(stats.degenerate == 1);
}

TEST_CASE("normalize_normals: scale invariance and z flip") {
  std::mt19937_64 rng(29);
  Tensor<double> raw = random_tensor(3, 4, 4, rng, -1.0, 1.0);
  Tensor<double> scaled = raw;
  scaled.vec() *= 7.25;
  const auto a = normalize_normals(raw), b = normalize_normals(scaled);
  CHECK((a.vec() - b.vec()).abs().maxCoeff() < 1e-12);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(a.pixel3(y, x)[2] > 0.0);
      CHECK(a.pixel3(y, x).norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("normalize_normals_backward matches finite differences") {
  std::mt19937_64 rng(31);
  const auto raw = random_tensor(3, 3, 3, rng, -1.0, 1.0);
  const auto upstream = random_tensor(3, 3, 3, rng, -1.0, 1.0);
  const auto grad = normalize_normals_backward(raw, upstream);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        auto f = [&](double v) {
          Tensor<double> t = raw;
          t(c, y, x) = v;
          return (normalize_normals(t).vec() * upstream.vec()).sum();
        };
        const double fd = forge::test::central_difference(f, raw(c, y, x), 1e-6);
        CHECK(close_rel(grad(c, y, x), fd, 1e-5));
      }
}

TEST_CASE("SvbrdfMaps and SceneConfig validation") {
  auto maps = SvbrdfMaps<double>::flat(8, 8, Vec3<double>(0.5, 0.5, 0.5), 0.1, 0.5);
  CHECK_NOTHROW(maps.validate());
  SvbrdfMaps<double> bad = maps;
  bad.roughness(0, 0, 0) = kAlphaMin / 2;
  CHECK_THROWS(bad.validate());
  bad = maps;
  bad.normal(2, 3, 3) = -1.0;
  CHECK_THROWS(bad.validate());
  bad = maps;
  bad.specular = Tensor<double>(1, 4, 4);
  CHECK_THROWS(bad.validate());

  SceneConfig<double> scene;
  scene.light_height = 0;
  CHECK_THROWS(scene.validate());
  scene = SceneConfig<double>::canonical();
  scene.colocated = false;
  CHECK_THROWS(scene.validate());
}
