#pragma once

#include "forge/feature_extractor.hpp"
#include "forge/fft.hpp"
#include "forge/image.hpp"
#include "forge/material.hpp"
#include "forge/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace forge {

/// Joint-loss weights; defaults are the published operating point
/// (lambda, lambda1, lambda2) = (0.1, 0.1, 0.2).
template <typename T>
struct LossWeights {
  T lambda_gan = T(0.1);
  T lambda_fourier = T(0.1);
  T lambda_perceptual = T(0.2);

  void validate() const {
    if (lambda_gan < T(0) || lambda_fourier < T(0) || lambda_perceptual < T(0))
      throw std::invalid_argument("LossWeights: weights must be >= 0");
  }
};

/// Per-term values for one training step. The Fourier term is a logarithm of
/// a small expectation and may legitimately be negative.
template <typename T>
struct LossReport {
  T diffuse = T(0);
  T adversarial_g = T(0);
  T adversarial_d = T(0);
  T fourier = T(0);
  T perceptual = T(0);
  T total_generator = T(0);

  bool finite() const {
    return std::isfinite(diffuse) && std::isfinite(adversarial_g) &&
           std::isfinite(adversarial_d) && std::isfinite(fourier) &&
           std::isfinite(perceptual) && std::isfinite(total_generator);
  }
};

/// Per-map enables for the Fourier loss (the Fig. 9-style ablation knobs)
/// plus the raw-complex-difference variant kept behind a flag.
struct FourierFlags {
  bool on_diffuse = true;
  bool on_specular = true;
  bool on_roughness = true;
  bool on_normal = true;
  bool complex_difference = false;

  int enabled_count() const {
    return int(on_diffuse) + int(on_specular) + int(on_roughness) + int(on_normal);
  }
};

inline constexpr double kFourierEps = 1e-8;
inline constexpr double kLogitEps = 1e-7;

// ---------------------------------------------------------------------------
// Diffuse loss: mean absolute difference against the guessed diffuse map.

template <typename T>
T diffuse_loss(const Tensor<T>& pred, const Tensor<T>& guessed) {
  if (!pred.same_shape(guessed)) throw std::invalid_argument("diffuse_loss: shape mismatch");
  return (pred.vec() - guessed.vec()).abs().mean();
}

template <typename T>
Tensor<T> diffuse_loss_backward(const Tensor<T>& pred, const Tensor<T>& guessed) {
  Tensor<T> g(pred.channels(), pred.rows(), pred.cols());
  const T inv_n = T(1) / T(pred.size());
  g.vec() = (pred.vec() - guessed.vec()).sign() * inv_n;
  return g;
}

// ---------------------------------------------------------------------------
// Adversarial losses on patch logits. The discriminator objective is the
// usual binary cross-entropy; the generator uses the non-saturating form.
// The 1e-7 clamp only guards the log; gradients use the analytic expressions.

template <typename T>
struct AdversarialLosses {
  T d_loss;
  T g_loss;
};

namespace detail {
template <typename T>
ArrayX<T> sigmoid_of(const Tensor<T>& logits) {
  return (T(1) / (T(1) + (-logits.vec()).exp())).eval();
}
template <typename T>
T clamped_log_mean(const ArrayX<T>& p) {
  return p.max(T(kLogitEps)).log().mean();
}
}  // namespace detail

template <typename T>
AdversarialLosses<T> adversarial_losses(const Tensor<T>& disc_real, const Tensor<T>& disc_fake) {
  if (!all_finite(disc_real) || !all_finite(disc_fake))
    throw std::invalid_argument("adversarial_losses: non-finite logits");
  const ArrayX<T> pr = detail::sigmoid_of(disc_real);
  const ArrayX<T> pf = detail::sigmoid_of(disc_fake);
  AdversarialLosses<T> out;
  out.d_loss = -detail::clamped_log_mean(pr) - detail::clamped_log_mean((T(1) - pf).eval());
  out.g_loss = -detail::clamped_log_mean(pf);
  return out;
}

/// Gradients of d_loss w.r.t. both logit grids.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> adversarial_d_backward(const Tensor<T>& disc_real,
                                                       const Tensor<T>& disc_fake) {
  Tensor<T> dr(disc_real.channels(), disc_real.rows(), disc_real.cols());
  Tensor<T> df(disc_fake.channels(), disc_fake.rows(), disc_fake.cols());
  dr.vec() = (detail::sigmoid_of(disc_real) - T(1)) / T(disc_real.size());
  df.vec() = detail::sigmoid_of(disc_fake) / T(disc_fake.size());
  return {std::move(dr), std::move(df)};
}

/// Gradient of g_loss w.r.t. the fake logits.
template <typename T>
Tensor<T> adversarial_g_backward(const Tensor<T>& disc_fake) {
  Tensor<T> df(disc_fake.channels(), disc_fake.rows(), disc_fake.cols());
  df.vec() = (detail::sigmoid_of(disc_fake) - T(1)) / T(disc_fake.size());
  return df;
}

// ---------------------------------------------------------------------------
// Fourier stationarity loss: per map, compare the DC-free spectrum against
// the guessed diffuse map's spectrum, average over the enabled maps and take
// the log. Magnitude spectra make the comparison invariant to texture phase
// (circular shifts); the raw complex difference is kept behind a flag.

template <typename T>
struct FourierReference {
  ArrayXX<T> mag;            // |FFT| of the reduced guessed map, DC zeroed
  ComplexGrid<T> spectrum;   // full spectrum for the complex variant
  int rows = 0, cols = 0;
};

template <typename T>
FourierReference<T> make_fourier_reference(const Tensor<T>& guessed) {
  Tensor<T> reduced = channel_mean(guessed);
  FourierReference<T> ref;
  ref.spectrum = fft2<T>(reduced.plane(0));
  ref.spectrum(0, 0) = std::complex<T>(0, 0);
  ref.mag = ref.spectrum.abs();
  ref.rows = guessed.rows();
  ref.cols = guessed.cols();
  return ref;
}

namespace detail {

/// Reduce a map to the single channel the spectral comparison runs on.
/// Normal maps enter in their encoded RGB form (n * 0.5 + 0.5).
template <typename T>
Tensor<T> fourier_channel(const Tensor<T>& map, bool encode_normal) {
  if (!encode_normal) return channel_mean(map);
  Tensor<T> enc(map.channels(), map.rows(), map.cols());
  enc.vec() = map.vec() * T(0.5) + T(0.5);
  return channel_mean(enc);
}

template <typename T>
struct FourierTerm {
  T value;
  ComplexGrid<T> bin_grad;  // d(term)/d(spectrum bin), before outer scaling
};

template <typename T>
FourierTerm<T> fourier_term(const Tensor<T>& chan, const FourierReference<T>& ref,
                            bool complex_difference, bool want_grad) {
  ComplexGrid<T> f = fft2<T>(chan.plane(0));
  f(0, 0) = std::complex<T>(0, 0);
  const T inv_n = T(1) / T(f.size());
  FourierTerm<T> out;
  if (want_grad) out.bin_grad = ComplexGrid<T>::Zero(f.rows(), f.cols());
  T acc = T(0);
  for (Eigen::Index r = 0; r < f.rows(); ++r)
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      if (complex_difference) {
        const std::complex<T> d = f(r, c) - ref.spectrum(r, c);
        const T m = std::abs(d);
        acc += m;
        if (want_grad && m > T(0)) out.bin_grad(r, c) = d / m * inv_n;
      } else {
        const T m = std::abs(f(r, c));
        const T diff = m - ref.mag(r, c);
        acc += std::abs(diff);
        if (want_grad && m > T(0) && diff != T(0))
          out.bin_grad(r, c) = f(r, c) / m * (diff > T(0) ? inv_n : -inv_n);
      }
    }
  if (want_grad) out.bin_grad(0, 0) = std::complex<T>(0, 0);
  out.value = acc * inv_n;
  return out;
}

}  // namespace detail

template <typename T>
T fourier_loss(const SvbrdfMaps<T>& maps, const Tensor<T>& guessed,
               const FourierFlags& flags = {}) {
  const FourierReference<T> ref = make_fourier_reference(guessed);
  return fourier_loss(maps, ref, flags);
}

template <typename T>
T fourier_loss(const SvbrdfMaps<T>& maps, const FourierReference<T>& ref,
               const FourierFlags& flags, MapsGrad<T>* grad = nullptr) {
  if (maps.rows() != ref.rows || maps.cols() != ref.cols)
    throw std::invalid_argument("fourier_loss: shape mismatch");
  const int n_enabled = flags.enabled_count();
  if (n_enabled == 0) return T(std::log(kFourierEps));

  struct Entry {
    const Tensor<T>* map;
    Tensor<T>* gmap;
    bool enabled;
    bool is_normal;
  };
  if (grad) *grad = MapsGrad<T>::zeros(maps.rows(), maps.cols());
  Entry entries[4] = {
      {&maps.diffuse, grad ? &grad->diffuse : nullptr, flags.on_diffuse, false},
      {&maps.specular, grad ? &grad->specular : nullptr, flags.on_specular, false},
      {&maps.roughness, grad ? &grad->roughness : nullptr, flags.on_roughness, false},
      {&maps.normal, grad ? &grad->normal : nullptr, flags.on_normal, true},
  };

  T value = T(0);
  detail::FourierTerm<T> terms[4];
  for (auto& e : entries) {
    if (!e.enabled) continue;
    const Tensor<T> chan = detail::fourier_channel(*e.map, e.is_normal);
    const auto idx = &e - entries;
    terms[idx] = detail::fourier_term(chan, ref, flags.complex_difference, grad != nullptr);
    value += terms[idx].value;
  }
  value /= T(n_enabled);
  const T loss = std::log(value + T(kFourierEps));

  if (grad) {
    const T outer = T(1) / ((value + T(kFourierEps)) * T(n_enabled));
    for (auto& e : entries) {
      if (!e.enabled) continue;
      const auto idx = &e - entries;
      ComplexGrid<T> g = terms[idx].bin_grad * outer;
      ArrayXX<T> dchan = fft2_adjoint_real<T>(g);
      const T per_channel = e.is_normal ? T(0.5) / T(e.map->channels())
                                        : T(1) / T(e.map->channels());
      for (int c = 0; c < e.map->channels(); ++c) e.gmap->plane(c) += dchan * per_channel;
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Perceptual loss: mean absolute feature difference across the extractor's
// tapped layers, equal weights.

template <typename T>
T perceptual_loss(const LdrImage<T>& input_photo, const LdrImage<T>& rerender,
                  const FeatureExtractor<T>& fx, Tensor<T>* d_rerender = nullptr) {
  if (input_photo.rows() != rerender.rows() || input_photo.cols() != rerender.cols())
    throw std::invalid_argument("perceptual_loss: shape mismatch");
  if (fx.empty()) throw std::runtime_error("feature extractor unavailable");
  typename FeatureExtractor<T>::Cache cache_i, cache_r;
  const auto taps_i = fx.forward(input_photo.rgb, cache_i);
  const auto taps_r = fx.forward(rerender.rgb, cache_r);
  const T per_tap = T(1) / T(taps_i.size());
  T loss = T(0);
  std::vector<Tensor<T>> d_taps;
  if (d_rerender) d_taps.resize(taps_i.size());
  for (size_t i = 0; i < taps_i.size(); ++i) {
    loss += (taps_r[i].vec() - taps_i[i].vec()).abs().mean() * per_tap;
    if (d_rerender) {
      d_taps[i] = Tensor<T>(taps_r[i].channels(), taps_r[i].rows(), taps_r[i].cols());
      d_taps[i].vec() =
          (taps_r[i].vec() - taps_i[i].vec()).sign() * (per_tap / T(taps_r[i].size()));
    }
  }
  if (d_rerender) *d_rerender = fx.backward(d_taps, cache_r);
  return loss;
}

// ---------------------------------------------------------------------------
// Joint generator objective.

template <typename T>
LossReport<T> total_generator_loss(T diffuse, T adversarial_g, T adversarial_d, T fourier,
                                   T perceptual, const LossWeights<T>& weights) {
  LossReport<T> r;
  r.diffuse = diffuse;
  r.adversarial_g = adversarial_g;
  r.adversarial_d = adversarial_d;
  r.fourier = fourier;
  r.perceptual = perceptual;
  r.total_generator = diffuse + weights.lambda_gan * adversarial_g +
                      weights.lambda_fourier * fourier + weights.lambda_perceptual * perceptual;
  return r;
}

}  // namespace forge
