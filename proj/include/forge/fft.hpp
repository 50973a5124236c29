#pragma once

#include "forge/tensor.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>

namespace forge {

template <typename T>
using ComplexGrid = Eigen::Array<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {
template <typename T>
Eigen::FFT<T>& fft_engine() {
  thread_local Eigen::FFT<T> engine;
  return engine;
}
}  // namespace detail

/// Unnormalized forward 2-D DFT of a real plane (rows, then columns).
template <typename T>
ComplexGrid<T> fft2(const Eigen::Ref<const ArrayXX<T>>& x) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  auto& engine = detail::fft_engine<T>();
  ComplexGrid<T> out(h, w);
  Eigen::Matrix<T, Eigen::Dynamic, 1> row(w);
  Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1> crow(w), col(h), ccol(h);
  for (int y = 0; y < h; ++y) {
    row = x.row(y).transpose().matrix();
    engine.fwd(crow, row);
    out.row(y) = crow.transpose().array();
  }
  for (int c = 0; c < w; ++c) {
    col = out.col(c).matrix();
    engine.fwd(ccol, col);
    out.col(c) = ccol.array();
  }
  return out;
}

/// Forward 2-D DFT of a complex grid.
template <typename T>
ComplexGrid<T> fft2c(const ComplexGrid<T>& x) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  auto& engine = detail::fft_engine<T>();
  ComplexGrid<T> out(h, w);
  Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1> crow(w), tmp(w), col(h), ccol(h);
  for (int y = 0; y < h; ++y) {
    tmp = x.row(y).transpose().matrix();
    engine.fwd(crow, tmp);
    out.row(y) = crow.transpose().array();
  }
  for (int c = 0; c < w; ++c) {
    col = out.col(c).matrix();
    engine.fwd(ccol, col);
    out.col(c) = ccol.array();
  }
  return out;
}

/// Real part of the adjoint DFT, Re(F^H g): the gradient of a spectral loss
/// with respect to the real input plane, given the gradient g at each bin.
template <typename T>
ArrayXX<T> fft2_adjoint_real(const ComplexGrid<T>& g) {
  ComplexGrid<T> conj = g.conjugate();
  ComplexGrid<T> f = fft2c(conj);
  return f.real();
}

/// Magnitude spectrum with the DC bin zeroed.
template <typename T>
ArrayXX<T> magnitude_spectrum_no_dc(const Eigen::Ref<const ArrayXX<T>>& x) {
  ComplexGrid<T> f = fft2<T>(x);
  ArrayXX<T> mag = f.abs();
  mag(0, 0) = T(0);
  return mag;
}

/// Wrapped (signed) frequency index magnitude for bin i of an n-point DFT.
inline int wrapped_frequency(int i, int n) { return std::min(i, n - i); }

}  // namespace forge
