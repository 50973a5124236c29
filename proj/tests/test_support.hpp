#pragma once

#include "forge/tensor.hpp"

#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace forge::test {

inline Tensor<double> random_tensor(int c, int h, int w, std::mt19937_64& rng, double lo = 0.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Tensor<double> t(c, h, w);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uni(rng);
  return t;
}

inline Tensor<float> random_tensor_f(int c, int h, int w, std::mt19937_64& rng, float lo = 0.0f,
                                     float hi = 1.0f) {
  std::uniform_real_distribution<float> uni(lo, hi);
  Tensor<float> t(c, h, w);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uni(rng);
  return t;
}

/// Central finite difference of a scalar functional at one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x0,
                                 double step = 1e-3) {
  return (f(x0 + step) - f(x0 - step)) / (2.0 * step);
}

inline bool close_rel(double got, double want, double tol) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-12});
  return std::abs(got - want) / scale <= tol;
}

/// O(N^4) direct DFT transcription, independent of the FFT implementation.
inline Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic> dft2_oracle(
    const ArrayXX<double>& x) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic> out(h, w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      std::complex<double> acc(0, 0);
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const double phase = -2.0 * M_PI * (double(u) * y / h + double(v) * xx / w);
          acc += x(y, xx) * std::complex<double>(std::cos(phase), std::sin(phase));
        }
      out(u, v) = acc;
    }
  return out;
}

/// Scratch directory under the system temp dir, unique per tag.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("svbrdf_forge_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path_.string() : (path_ / leaf).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace forge::test
