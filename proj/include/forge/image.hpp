#pragma once

#include "forge/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace forge {

/// Rec.709 luma weights; single-channel inputs pass through unchanged.
template <typename T>
Tensor<T> luminance(const Tensor<T>& rgb) {
  Tensor<T> out(1, rgb.rows(), rgb.cols());
  if (rgb.channels() == 1) {
    out.plane(0) = rgb.plane(0);
  } else if (rgb.channels() == 3) {
    out.plane(0) = T(0.2126) * rgb.plane(0) + T(0.7152) * rgb.plane(1) +
                   T(0.0722) * rgb.plane(2);
  } else {
    throw std::invalid_argument("luminance: expected 1 or 3 channels");
  }
  return out;
}

/// HDR render target: linear radiance, nonnegative, unbounded above.
template <typename T>
struct LinearImage {
  Tensor<T> rgb;

  static LinearImage make(Tensor<T> t) {
    if (t.channels() != 3)
      throw std::invalid_argument("LinearImage: expected 3 channels");
    if (!t.vec().isFinite().all() || (t.vec() < T(0)).any())
      throw std::invalid_argument("LinearImage: radiance must be finite and >= 0");
    return LinearImage{std::move(t)};
  }

  int rows() const { return rgb.rows(); }
  int cols() const { return rgb.cols(); }
};

/// Display-referred image: gamma-encoded values in [0,1], matching 8-bit
/// photo inputs.
template <typename T>
struct LdrImage {
  Tensor<T> rgb;

  static LdrImage make(Tensor<T> t) {
    if (t.channels() != 3)
      throw std::invalid_argument("LdrImage: expected 3 channels");
    if (!t.vec().isFinite().all() || (t.vec() < T(0)).any() || (t.vec() > T(1)).any())
      throw std::invalid_argument("LdrImage: values must lie in [0,1]");
    return LdrImage{std::move(t)};
  }

  int rows() const { return rgb.rows(); }
  int cols() const { return rgb.cols(); }
};

/// clamp(img, 0, 1)^(1/gamma). Values above 1 clip to white, which is exactly
/// how an overexposed highlight ends up in an 8-bit photo.
template <typename T>
LdrImage<T> tonemap(const LinearImage<T>& img, T gamma) {
  if (!(gamma > T(0))) throw std::invalid_argument("tonemap: gamma must be > 0");
  Tensor<T> out(3, img.rows(), img.cols());
  out.vec() = img.rgb.vec().min(T(1)).max(T(0)).pow(T(1) / gamma);
  return LdrImage<T>{std::move(out)};
}

/// Chain rule through tonemap. The derivative of x^(1/g) blows up at x = 0
/// and is zero in the clipped region; the small floor keeps gradients finite
/// for black pixels.
template <typename T>
Tensor<T> tonemap_backward(const LinearImage<T>& img, T gamma,
                           const Tensor<T>& d_ldr) {
  Tensor<T> dx(3, img.rows(), img.cols());
  const T inv_g = T(1) / gamma;
  const T floor = T(1e-6);
  dx.vec() = (img.rgb.vec() < T(1))
                 .select(inv_g * img.rgb.vec().max(floor).pow(inv_g - T(1)), T(0)) *
             d_ldr.vec();
  return dx;
}

}  // namespace forge
