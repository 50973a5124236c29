#pragma once

#include "forge/tensor.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace forge {

template <typename T>
using VectorXT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using RowMajorMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Visits (name, value, grad, count) for every parameter array.
template <typename T>
using ParamVisitor = std::function<void(const std::string&, T*, T*, Eigen::Index)>;

namespace detail {

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

/// Unfolds x into a (in_ch*k*k) x (ho*wo) matrix of patch columns.
template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, int ho, int wo,
            MatrixX<T>& cols) {
  const int in_ch = x.channels(), h = x.rows(), w = x.cols();
  cols.resize(static_cast<Eigen::Index>(in_ch) * k * k, static_cast<Eigen::Index>(ho) * wo);
  for (int c = 0; c < in_ch; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index r = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int y = oy * stride - pad + ky;
          const bool row_ok = y >= 0 && y < h;
          for (int ox = 0; ox < wo; ++ox) {
            const int xx = ox * stride - pad + kx;
            cols(r, static_cast<Eigen::Index>(oy) * wo + ox) =
                (row_ok && xx >= 0 && xx < w) ? x(c, y, xx) : T(0);
          }
        }
      }
}

/// Adjoint of im2col: scatter-adds patch columns back into an image.
template <typename T>
void col2im(const MatrixX<T>& cols, int k, int stride, int pad, int ho, int wo,
            Tensor<T>& x) {
  const int ch = x.channels(), h = x.rows(), w = x.cols();
  x.vec().setZero();
  for (int c = 0; c < ch; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index r = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int y = oy * stride - pad + ky;
          if (y < 0 || y >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int xx = ox * stride - pad + kx;
            if (xx < 0 || xx >= w) continue;
            x(c, y, xx) += cols(r, static_cast<Eigen::Index>(oy) * wo + ox);
          }
        }
      }
}

}  // namespace detail

template <typename T>
struct ConvCache {
  Tensor<T> input;
  MatrixX<T> cols;
  int ho = 0, wo = 0;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad) {
    weight = MatrixX<T>::Zero(out_ch, static_cast<Eigen::Index>(in_ch) * kernel * kernel);
    bias = VectorXT<T>::Zero(out_ch);
    d_weight = MatrixX<T>::Zero(weight.rows(), weight.cols());
    d_bias = VectorXT<T>::Zero(out_ch);
  }

  void init(std::mt19937_64& rng, T stddev = T(0.02)) {
    std::normal_distribution<double> normal(0.0, static_cast<double>(stddev));
    for (Eigen::Index i = 0; i < weight.size(); ++i)
      weight.data()[i] = static_cast<T>(normal(rng));
    bias.setZero();
  }

  Tensor<T> forward(const Tensor<T>& x, ConvCache<T>& cache) const {
    cache.input = x;
    cache.ho = detail::conv_out_size(x.rows(), k_, stride_, pad_);
    cache.wo = detail::conv_out_size(x.cols(), k_, stride_, pad_);
    detail::im2col(x, k_, stride_, pad_, cache.ho, cache.wo, cache.cols);
    Tensor<T> out(out_ch_, cache.ho, cache.wo);
    RowMajorMap<T> outm(out.data(), out_ch_, static_cast<Eigen::Index>(cache.ho) * cache.wo);
    outm.noalias() = weight * cache.cols;
    outm.colwise() += bias;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, const ConvCache<T>& cache, bool need_dx = true) {
    const Eigen::Index n = static_cast<Eigen::Index>(cache.ho) * cache.wo;
    ConstRowMajorMap<T> dym(dy.data(), out_ch_, n);
    d_weight.noalias() += dym * cache.cols.transpose();
    d_bias.noalias() += dym.rowwise().sum();
    if (!need_dx) return Tensor<T>();
    MatrixX<T> cols_grad = weight.transpose() * dym;
    Tensor<T> dx(in_ch_, cache.input.rows(), cache.input.cols());
    detail::col2im(cols_grad, k_, stride_, pad_, cache.ho, cache.wo, dx);
    return dx;
  }

  void zero_grad() {
    d_weight.setZero();
    d_bias.setZero();
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& v) {
    v(prefix + ".w", weight.data(), d_weight.data(), weight.size());
    v(prefix + ".b", bias.data(), d_bias.data(), bias.size());
  }

  int out_channels() const { return out_ch_; }

  MatrixX<T> weight, d_weight;  // out_ch x (in_ch*k*k)
  VectorXT<T> bias, d_bias;

 private:
  int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 0, pad_ = 0;
};

template <typename T>
struct ConvTransposeCache {
  Tensor<T> input;
  int ho = 0, wo = 0;
};

/// Fractionally-strided convolution; output side = in*stride for k = 2*stride
/// and pad = stride/2 (the k4/s2/p1 blocks used by the decoders).
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad) {
    weight = MatrixX<T>::Zero(in_ch, static_cast<Eigen::Index>(out_ch) * kernel * kernel);
    bias = VectorXT<T>::Zero(out_ch);
    d_weight = MatrixX<T>::Zero(weight.rows(), weight.cols());
    d_bias = VectorXT<T>::Zero(out_ch);
  }

  void init(std::mt19937_64& rng, T stddev = T(0.02)) {
    std::normal_distribution<double> normal(0.0, static_cast<double>(stddev));
    for (Eigen::Index i = 0; i < weight.size(); ++i)
      weight.data()[i] = static_cast<T>(normal(rng));
    bias.setZero();
  }

  Tensor<T> forward(const Tensor<T>& x, ConvTransposeCache<T>& cache) const {
    cache.input = x;
    cache.ho = (x.rows() - 1) * stride_ - 2 * pad_ + k_;
    cache.wo = (x.cols() - 1) * stride_ - 2 * pad_ + k_;
    const Eigen::Index n = static_cast<Eigen::Index>(x.rows()) * x.cols();
    ConstRowMajorMap<T> xm(x.data(), in_ch_, n);
    MatrixX<T> cols = weight.transpose() * xm;
    Tensor<T> out(out_ch_, cache.ho, cache.wo);
    detail::col2im(cols, k_, stride_, pad_, x.rows(), x.cols(), out);
    for (int c = 0; c < out_ch_; ++c) out.plane(c) += bias[c];
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, const ConvTransposeCache<T>& cache,
                     bool need_dx = true) {
    const int hin = cache.input.rows(), win = cache.input.cols();
    const Eigen::Index n = static_cast<Eigen::Index>(hin) * win;
    MatrixX<T> cols;
    detail::im2col(dy, k_, stride_, pad_, hin, win, cols);
    ConstRowMajorMap<T> xm(cache.input.data(), in_ch_, n);
    d_weight.noalias() += xm * cols.transpose();
    for (int c = 0; c < out_ch_; ++c) d_bias[c] += dy.plane(c).sum();
    if (!need_dx) return Tensor<T>();
    Tensor<T> dx(in_ch_, hin, win);
    RowMajorMap<T> dxm(dx.data(), in_ch_, n);
    dxm.noalias() = weight * cols;
    return dx;
  }

  void zero_grad() {
    d_weight.setZero();
    d_bias.setZero();
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& v) {
    v(prefix + ".w", weight.data(), d_weight.data(), weight.size());
    v(prefix + ".b", bias.data(), d_bias.data(), bias.size());
  }

  MatrixX<T> weight, d_weight;  // in_ch x (out_ch*k*k)
  VectorXT<T> bias, d_bias;

 private:
  int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 0, pad_ = 0;
};

template <typename T>
struct InstanceNormCache {
  Tensor<T> xhat;
  VectorXT<T> inv_std;
};

/// Per-channel, per-instance normalization without affine parameters.
template <typename T>
class InstanceNorm {
 public:
  Tensor<T> forward(const Tensor<T>& x, InstanceNormCache<T>& cache) const {
    const int ch = x.channels();
    cache.xhat = Tensor<T>(ch, x.rows(), x.cols());
    cache.inv_std.resize(ch);
    for (int c = 0; c < ch; ++c) {
      const T m = x.plane(c).mean();
      const T var = (x.plane(c) - m).square().mean();
      const T inv = T(1) / std::sqrt(var + eps);
      cache.inv_std[c] = inv;
      cache.xhat.plane(c) = (x.plane(c) - m) * inv;
    }
    return cache.xhat;
  }

  Tensor<T> backward(const Tensor<T>& dy, const InstanceNormCache<T>& cache) const {
    Tensor<T> dx(dy.channels(), dy.rows(), dy.cols());
    for (int c = 0; c < dy.channels(); ++c) {
      const T s1 = dy.plane(c).mean();
      const T s2 = (dy.plane(c) * cache.xhat.plane(c)).mean();
      dx.plane(c) = cache.inv_std[c] * (dy.plane(c) - s1 - cache.xhat.plane(c) * s2);
    }
    return dx;
  }

  T eps = T(1e-5);
};

template <typename T>
struct LeakyReluCache {
  Tensor<T> input;
};

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope, LeakyReluCache<T>& cache) {
  cache.input = x;
  Tensor<T> y(x.channels(), x.rows(), x.cols());
  y.vec() = x.vec().max(slope * x.vec());
  return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& dy, T slope, const LeakyReluCache<T>& cache) {
  Tensor<T> dx(dy.channels(), dy.rows(), dy.cols());
  dx.vec() = (cache.input.vec() > T(0)).select(dy.vec(), slope * dy.vec());
  return dx;
}

template <typename T>
struct SigmoidCache {
  Tensor<T> output;
};

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x, SigmoidCache<T>& cache) {
  Tensor<T> y(x.channels(), x.rows(), x.cols());
  y.vec() = T(1) / (T(1) + (-x.vec()).exp());
  cache.output = y;
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& dy, const SigmoidCache<T>& cache) {
  Tensor<T> dx(dy.channels(), dy.rows(), dy.cols());
  dx.vec() = dy.vec() * cache.output.vec() * (T(1) - cache.output.vec());
  return dx;
}

template <typename T>
struct MaxPoolCache {
  std::vector<Eigen::Index> argmax;
  int in_h = 0, in_w = 0;
};

/// 2x2 max pooling with stride 2 (even input sides expected).
template <typename T>
Tensor<T> max_pool2(const Tensor<T>& x, MaxPoolCache<T>& cache) {
  const int ch = x.channels(), ho = x.rows() / 2, wo = x.cols() / 2;
  cache.in_h = x.rows();
  cache.in_w = x.cols();
  cache.argmax.assign(static_cast<size_t>(ch) * ho * wo, 0);
  Tensor<T> y(ch, ho, wo);
  for (int c = 0; c < ch; ++c)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T best = x(c, 2 * oy, 2 * ox);
        int by = 2 * oy, bx = 2 * ox;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const T v = x(c, 2 * oy + dy, 2 * ox + dx);
            if (v > best) {
              best = v;
              by = 2 * oy + dy;
              bx = 2 * ox + dx;
            }
          }
        y(c, oy, ox) = best;
        cache.argmax[(static_cast<size_t>(c) * ho + oy) * wo + ox] =
            (static_cast<Eigen::Index>(c) * cache.in_h + by) * cache.in_w + bx;
      }
  return y;
}

template <typename T>
Tensor<T> max_pool2_backward(const Tensor<T>& dy, const MaxPoolCache<T>& cache) {
  Tensor<T> dx(dy.channels(), cache.in_h, cache.in_w);
  for (int c = 0; c < dy.channels(); ++c)
    for (int oy = 0; oy < dy.rows(); ++oy)
      for (int ox = 0; ox < dy.cols(); ++ox)
        dx.data()[cache.argmax[(static_cast<size_t>(c) * dy.rows() + oy) * dy.cols() + ox]] +=
            dy(c, oy, ox);
  return dx;
}

}  // namespace forge
