#pragma once

#include "forge/image.hpp"
#include "forge/tensor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace forge {

/// Roughness floor: the GGX lobe diverges as alpha -> 0.
inline constexpr double kAlphaMin = 0.01;

/// Display gamma for 8-bit photo inputs and re-renders.
inline constexpr double kGamma = 2.2;

/// Colocated point light + camera above the center of a unit plane. The
/// plane spans [-plane_extent, plane_extent]^2 at z = 0 and the light sits at
/// (0, 0, light_height).
template <typename T>
struct SceneConfig {
  T plane_extent = T(1);
  T light_height = T(2);
  T light_intensity = T(1);
  bool colocated = true;

  void validate() const {
    if (!(plane_extent > T(0))) throw std::invalid_argument("SceneConfig: plane_extent must be > 0");
    if (!(light_height > T(0))) throw std::invalid_argument("SceneConfig: light_height must be > 0");
    if (!(light_intensity > T(0))) throw std::invalid_argument("SceneConfig: light_intensity must be > 0");
    if (!colocated) throw std::invalid_argument("SceneConfig: only colocated capture is supported");
  }

  /// Intensity calibrated once so a rho_d = 0.5 diffuse plane renders to LDR
  /// 0.5 at the center pixel: I = 0.5^gamma * 8 * pi with height 2, extent 1.
  static SceneConfig canonical() {
    SceneConfig s;
    s.plane_extent = T(1);
    s.light_height = T(2);
    s.light_intensity = T(std::pow(0.5, kGamma) * 8.0 * std::numbers::pi);
    return s;
  }
};

/// The four per-pixel SVBRDF parameter maps at a common resolution:
/// diffuse albedo (3ch, [0,1]), specular albedo (1ch, [0,1]), roughness
/// (1ch, [alpha_min, 1]) and unit surface normals (3ch, z > 0).
template <typename T>
struct SvbrdfMaps {
  Tensor<T> diffuse;
  Tensor<T> specular;
  Tensor<T> roughness;
  Tensor<T> normal;

  int rows() const { return diffuse.rows(); }
  int cols() const { return diffuse.cols(); }

  void validate() const {
    const int h = diffuse.rows(), w = diffuse.cols();
    if (diffuse.channels() != 3 || specular.channels() != 1 ||
        roughness.channels() != 1 || normal.channels() != 3)
      throw std::invalid_argument("SvbrdfMaps: bad channel counts");
    auto same = [&](const Tensor<T>& t) { return t.rows() == h && t.cols() == w; };
    if (!same(specular) || !same(roughness) || !same(normal))
      throw std::invalid_argument("SvbrdfMaps: maps must share one resolution");
    if ((diffuse.vec() < T(0)).any() || (diffuse.vec() > T(1)).any())
      throw std::invalid_argument("SvbrdfMaps: diffuse outside [0,1]");
    if ((specular.vec() < T(0)).any() || (specular.vec() > T(1)).any())
      throw std::invalid_argument("SvbrdfMaps: specular outside [0,1]");
    if ((roughness.vec() < T(kAlphaMin)).any() || (roughness.vec() > T(1)).any())
      throw std::invalid_argument("SvbrdfMaps: roughness outside [alpha_min, 1]");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Vec3<T> n = normal.pixel3(y, x);
        if (std::abs(n.norm() - T(1)) > T(1e-5) || !(n[2] > T(0)))
          throw std::invalid_argument("SvbrdfMaps: normals must be unit length with z > 0");
      }
  }

  static SvbrdfMaps flat(int h, int w, const Vec3<T>& rho_d, T rho_s, T alpha) {
    SvbrdfMaps m;
    m.diffuse = Tensor<T>(3, h, w);
    for (int c = 0; c < 3; ++c) m.diffuse.plane(c).setConstant(rho_d[c]);
    m.specular = Tensor<T>::constant(1, h, w, rho_s);
    m.roughness = Tensor<T>::constant(1, h, w, alpha);
    m.normal = Tensor<T>(3, h, w);
    m.normal.plane(2).setConstant(T(1));
    return m;
  }
};

/// Per-map gradients in the maps' native parameterization (unit normals for
/// the normal map).
template <typename T>
struct MapsGrad {
  Tensor<T> diffuse;
  Tensor<T> specular;
  Tensor<T> roughness;
  Tensor<T> normal;

  static MapsGrad zeros(int h, int w) {
    return MapsGrad{Tensor<T>(3, h, w), Tensor<T>(1, h, w), Tensor<T>(1, h, w),
                    Tensor<T>(3, h, w)};
  }

  void add_scaled(const MapsGrad& o, T s) {
    diffuse.vec() += s * o.diffuse.vec();
    specular.vec() += s * o.specular.vec();
    roughness.vec() += s * o.roughness.vec();
    normal.vec() += s * o.normal.vec();
  }
};

namespace detail {

template <typename T>
T pow5(T x) {
  const T x2 = x * x;
  return x2 * x2 * x;
}

/// GGX normal distribution, D(h) = a^2 / (pi ((n.h)^2 (a^2 - 1) + 1)^2).
template <typename T>
T ggx_d(T nh, T alpha) {
  const T a2 = alpha * alpha;
  const T q = nh * nh * (a2 - T(1)) + T(1);
  return a2 / (T(std::numbers::pi) * q * q);
}

/// Smith lambda for GGX; mu is the cosine against the normal.
template <typename T>
T smith_lambda(T mu, T alpha) {
  const T t2 = (T(1) - mu * mu) / (mu * mu);
  return (std::sqrt(T(1) + alpha * alpha * t2) - T(1)) / T(2);
}

}  // namespace detail

/// Cook-Torrance reflectance: Lambertian diffuse plus a GGX microfacet lobe
/// with height-correlated Smith masking and Schlick Fresnel (F0 = rho_s).
/// Directions must be unit length; backfacing configurations contribute zero.
template <typename T>
Vec3<T> eval_brdf(const Vec3<T>& wi, const Vec3<T>& wo, const Vec3<T>& rho_d,
                  T rho_s, T alpha, const Vec3<T>& n) {
  const T mu_i = n.dot(wi);
  const T mu_o = n.dot(wo);
  if (!(mu_i > T(0)) || !(mu_o > T(0))) return Vec3<T>::Zero();
  const Vec3<T> h = (wi + wo).normalized();
  const T nh = n.dot(h);
  const T d = detail::ggx_d(nh, alpha);
  const T f = rho_s + (T(1) - rho_s) * detail::pow5(T(1) - h.dot(wo));
  const T g = T(1) / (T(1) + detail::smith_lambda(mu_i, alpha) +
                      detail::smith_lambda(mu_o, alpha));
  const T spec = d * f * g / (T(4) * mu_i * mu_o);
  return rho_d / T(std::numbers::pi) + Vec3<T>::Constant(spec);
}

/// Renders the plane under the colocated light: per pixel,
/// radiance = f(l, l) * intensity / d^2 * max(n.l, 0), with l the unit vector
/// from the surface point to the light and d its distance. Pixel (y, x) maps
/// to plane position extent * (2 (x + 0.5) / W - 1) (likewise in y), so odd
/// resolutions place a pixel exactly at the center.
template <typename T>
LinearImage<T> render(const SvbrdfMaps<T>& maps, const SceneConfig<T>& scene) {
  scene.validate();
  const int h = maps.rows(), w = maps.cols();
  Tensor<T> out(3, h, w);
  for (int y = 0; y < h; ++y) {
    const T py = scene.plane_extent * (T(2) * (T(y) + T(0.5)) / T(h) - T(1));
    for (int x = 0; x < w; ++x) {
      const T px = scene.plane_extent * (T(2) * (T(x) + T(0.5)) / T(w) - T(1));
      const T d2 = px * px + py * py + scene.light_height * scene.light_height;
      const T inv_d = T(1) / std::sqrt(d2);
      const Vec3<T> l(-px * inv_d, -py * inv_d, scene.light_height * inv_d);
      const Vec3<T> n = maps.normal.pixel3(y, x);
      const T mu = n.dot(l);
      if (!(mu > T(0))) continue;
      const Vec3<T> f = eval_brdf(l, l, maps.diffuse.pixel3(y, x),
                                  maps.specular(0, y, x), maps.roughness(0, y, x), n);
      out.set_pixel3(y, x, f * (scene.light_intensity / d2 * mu));
    }
  }
  return LinearImage<T>::make(std::move(out));
}

/// Analytic adjoint of render(): propagates dL/d(radiance) into gradients for
/// all four maps. In the colocated geometry the half vector equals l, so the
/// Fresnel factor is exactly rho_s and the Smith term reduces to
/// G = 1/sqrt(1 + a^2 (1 - mu^2)/mu^2).
template <typename T>
MapsGrad<T> render_backward(const SvbrdfMaps<T>& maps, const SceneConfig<T>& scene,
                            const Tensor<T>& d_radiance) {
  const int h = maps.rows(), w = maps.cols();
  if (d_radiance.channels() != 3 || d_radiance.rows() != h || d_radiance.cols() != w)
    throw std::invalid_argument("render_backward: gradient shape mismatch");
  MapsGrad<T> grad = MapsGrad<T>::zeros(h, w);
  const T pi = T(std::numbers::pi);
  for (int y = 0; y < h; ++y) {
    const T py = scene.plane_extent * (T(2) * (T(y) + T(0.5)) / T(h) - T(1));
    for (int x = 0; x < w; ++x) {
      const T px = scene.plane_extent * (T(2) * (T(x) + T(0.5)) / T(w) - T(1));
      const T d2 = px * px + py * py + scene.light_height * scene.light_height;
      const T inv_d = T(1) / std::sqrt(d2);
      const Vec3<T> l(-px * inv_d, -py * inv_d, scene.light_height * inv_d);
      const Vec3<T> n = maps.normal.pixel3(y, x);
      const T mu = n.dot(l);
      if (!(mu > T(0))) continue;

      const T rho_s = maps.specular(0, y, x);
      const T alpha = maps.roughness(0, y, x);
      const T k = scene.light_intensity / d2;

      const T a2 = alpha * alpha;
      const T q = mu * mu * (a2 - T(1)) + T(1);
      const T d_ndf = a2 / (pi * q * q);
      const T u = T(1) + a2 * (T(1) - mu * mu) / (mu * mu);
      const T g = T(1) / std::sqrt(u);
      const T spec = d_ndf * rho_s * g / (T(4) * mu * mu);

      // Partials of the NDF and Smith factors.
      const T dD_dalpha = (T(2) * alpha * q - T(4) * alpha * a2 * mu * mu) / (pi * q * q * q);
      const T dD_dmu = -T(4) * a2 * mu * (a2 - T(1)) / (pi * q * q * q);
      const T t2 = (T(1) - mu * mu) / (mu * mu);
      const T u32 = u * std::sqrt(u);
      const T dG_dalpha = -alpha * t2 / u32;
      const T dG_dmu = a2 / (mu * mu * mu * u32);

      const Vec3<T> gout = d_radiance.pixel3(y, x);
      const T gsum = gout.sum();

      // diffuse: radiance_ch = rho_d_ch / pi * k * mu + ...
      const T c_diff = k * mu / pi;
      grad.diffuse(0, y, x) = gout[0] * c_diff;
      grad.diffuse(1, y, x) = gout[1] * c_diff;
      grad.diffuse(2, y, x) = gout[2] * c_diff;

      // specular albedo enters linearly through the Fresnel factor.
      grad.specular(0, y, x) = gsum * k * d_ndf * g / (T(4) * mu);

      // roughness through D and G.
      grad.roughness(0, y, x) =
          gsum * k * rho_s / (T(4) * mu) * (dD_dalpha * g + d_ndf * dG_dalpha);

      // normal through mu = n.l only (h == l is independent of n).
      const T dspec_dmu = rho_s / T(4) *
                          (dD_dmu * g / (mu * mu) + d_ndf * dG_dmu / (mu * mu) -
                           T(2) * d_ndf * g / (mu * mu * mu));
      T drad_dmu_sum = T(0);
      for (int c = 0; c < 3; ++c) {
        const T f_ch = maps.diffuse(c, y, x) / pi + spec;
        drad_dmu_sum += gout[c] * (k * f_ch + k * mu * dspec_dmu);
      }
      grad.normal(0, y, x) = drad_dmu_sum * l[0];
      grad.normal(1, y, x) = drad_dmu_sum * l[1];
      grad.normal(2, y, x) = drad_dmu_sum * l[2];
    }
  }
  return grad;
}

struct NormalizeStats {
  long degenerate = 0;
};

/// Maps an unconstrained 3-vector field to unit normals with positive z.
/// Scale-invariant per pixel; zero vectors (and the measure-zero z == 0 case,
/// which no sign flip can fix) fall back to (0,0,1) and are counted.
template <typename T>
Tensor<T> normalize_normals(const Tensor<T>& raw, NormalizeStats* stats = nullptr) {
  if (raw.channels() != 3) throw std::invalid_argument("normalize_normals: expected 3 channels");
  if (!all_finite(raw)) throw std::invalid_argument("normalize_normals: non-finite input");
  Tensor<T> out(3, raw.rows(), raw.cols());
  long degenerate = 0;
  for (int y = 0; y < raw.rows(); ++y)
    for (int x = 0; x < raw.cols(); ++x) {
      Vec3<T> r = raw.pixel3(y, x);
      const T len = r.norm();
      if (len == T(0) || r[2] == T(0)) {
        out.set_pixel3(y, x, Vec3<T>(T(0), T(0), T(1)));
        ++degenerate;
        continue;
      }
      Vec3<T> n = r / len;
      if (n[2] < T(0)) n = -n;
      out.set_pixel3(y, x, n);
    }
  if (stats) stats->degenerate = degenerate;
  return out;
}

/// Chain rule through normalize_normals; degenerate pixels get zero gradient.
template <typename T>
Tensor<T> normalize_normals_backward(const Tensor<T>& raw, const Tensor<T>& d_unit) {
  Tensor<T> out(3, raw.rows(), raw.cols());
  for (int y = 0; y < raw.rows(); ++y)
    for (int x = 0; x < raw.cols(); ++x) {
      Vec3<T> r = raw.pixel3(y, x);
      const T len = r.norm();
      if (len == T(0) || r[2] == T(0)) continue;
      const T s = r[2] < T(0) ? T(-1) : T(1);
      const Vec3<T> rhat = r / len;
      const Vec3<T> g = d_unit.pixel3(y, x);
      out.set_pixel3(y, x, (s / len) * (g - rhat * rhat.dot(g)));
    }
  return out;
}

}  // namespace forge
