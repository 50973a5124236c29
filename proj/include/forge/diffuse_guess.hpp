#pragma once

#include "forge/fft.hpp"
#include "forge/image.hpp"
#include "forge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace forge {

namespace detail {

/// Symmetric mirror index (edge pixel included): -1 -> 0, n -> n-1.
inline int mirror_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

template <typename T>
std::vector<T> gaussian_kernel(T sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<T> k(2 * radius + 1);
  T sum = T(0);
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-T(i) * T(i) / (T(2) * sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

template <typename T>
T percentile(const Tensor<T>& plane, double p) {
  std::vector<T> vals(plane.data(), plane.data() + plane.size());
  const auto nth = static_cast<size_t>(p * (vals.size() - 1));
  std::nth_element(vals.begin(), vals.begin() + nth, vals.end());
  return vals[nth];
}

}  // namespace detail

/// Separable Gaussian blur with mirror padding.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& plane, T sigma) {
  if (!(sigma > T(0))) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
  const auto kernel = detail::gaussian_kernel(sigma);
  const int radius = (static_cast<int>(kernel.size()) - 1) / 2;
  const int h = plane.rows(), w = plane.cols();
  Tensor<T> tmp(plane.channels(), h, w), out(plane.channels(), h, w);
  for (int c = 0; c < plane.channels(); ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        T acc = T(0);
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * plane(c, y, detail::mirror_index(x + i, w));
        tmp(c, y, x) = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        T acc = T(0);
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp(c, detail::mirror_index(y + i, h), x);
        out(c, y, x) = acc;
      }
  }
  return out;
}

/// Smooth per-pixel illumination estimate: Gaussian low-pass of luminance,
/// floored so the subsequent division stays finite.
template <typename T>
Tensor<T> estimate_illumination(const LdrImage<T>& photo, T sigma) {
  Tensor<T> blurred = gaussian_blur(luminance(photo.rgb), sigma);
  blurred.plane(0) = blurred.plane(0).max(T(1e-4));
  return blurred;
}

/// Fraction of non-DC spectral energy in the lowest 1/16 of frequencies
/// (|f| <= Nyquist/16 per axis). Near 0 for stationary textures, rises when
/// illumination-scale structure contaminates the map. Defined as 0 when there
/// is no non-DC energy at all.
template <typename T>
T stationarity_score(const Tensor<T>& plane) {
  const Tensor<T> lum = plane.channels() == 1 ? plane : luminance(plane);
  ArrayXX<T> mag = magnitude_spectrum_no_dc<T>(lum.plane(0));
  const int h = lum.rows(), w = lum.cols();
  const int fy_max = h / 32, fx_max = w / 32;
  T low = T(0), total = T(0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const T e = mag(y, x) * mag(y, x);
      total += e;
      if (wrapped_frequency(y, h) <= fy_max && wrapped_frequency(x, w) <= fx_max)
        low += e;
    }
  return total > T(0) ? low / total : T(0);
}

template <typename T>
struct GuessedDiffuse {
  Tensor<T> map;  // H x W x 3 in [0,1]
  T score = T(0);
};

/// Builds the pseudo-ground-truth diffuse map from the input photograph:
/// divide out a low-pass illumination estimate, rescale the result to a fixed
/// mid-level (median luminance 0.5, which makes the construction invariant to
/// global exposure), then soft-clip the brightest percentile so residual
/// highlight cores do not leave hard spectral edges.
template <typename T>
GuessedDiffuse<T> guess_diffuse(const LdrImage<T>& photo, T sigma = T(0)) {
  const int h = photo.rows(), w = photo.cols();
  if (sigma <= T(0)) sigma = T(h) / T(8);

  Tensor<T> lum = luminance(photo.rgb);
  if ((lum.plane(0) <= T(0)).all())
    throw std::runtime_error("degenerate input: zero luminance");

  Tensor<T> illum = estimate_illumination(photo, sigma);
  Tensor<T> out(3, h, w);
  for (int c = 0; c < 3; ++c) out.plane(c) = photo.rgb.plane(c) / illum.plane(0);

  Tensor<T> out_lum = luminance(out);
  const T med = std::max(detail::percentile(out_lum, 0.5), T(1e-4));
  const T m = T(0.5) / med;
  out.vec() *= m;
  out_lum.plane(0) *= m;

  // x -> p99 + (x - p99)/4 above the 99th luminance percentile, applied as a
  // per-pixel luminance rescale so hue is preserved.
  const T p99 = detail::percentile(out_lum, 0.99);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const T l = out_lum(0, y, x);
      if (l > p99 && l > T(0)) {
        const T s = (p99 + (l - p99) * T(0.25)) / l;
        for (int c = 0; c < 3; ++c) out(c, y, x) *= s;
      }
    }

  out.vec() = out.vec().min(T(1)).max(T(0));
  GuessedDiffuse<T> g;
  g.score = stationarity_score(out);
  g.map = std::move(out);
  return g;
}

}  // namespace forge
