#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace forge {

template <typename T>
using ArrayX = Eigen::Array<T, Eigen::Dynamic, 1>;

template <typename T>
using ArrayXX = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;

/// Dense planar buffer for images, parameter maps and network activations.
/// Layout is channel-major: `channels` planes of `rows * cols` scalars, each
/// plane row-major. Plane views map straight onto Eigen arrays so callers can
/// use expression syntax instead of explicit loops.
template <typename T>
class Tensor {
 public:
  using PlaneView = Eigen::Map<ArrayXX<T>>;
  using ConstPlaneView = Eigen::Map<const ArrayXX<T>>;
  using VecView = Eigen::Map<ArrayX<T>>;
  using ConstVecView = Eigen::Map<const ArrayX<T>>;

  Tensor() = default;

  Tensor(int channels, int rows, int cols)
      : c_(channels), h_(rows), w_(cols) {
    if (channels <= 0 || rows <= 0 || cols <= 0)
      throw std::invalid_argument("Tensor: non-positive shape");
    data_ = ArrayX<T>::Zero(static_cast<Eigen::Index>(channels) * rows * cols);
  }

  static Tensor constant(int channels, int rows, int cols, T value) {
    Tensor t(channels, rows, cols);
    t.data_.setConstant(value);
    return t;
  }

  int channels() const { return c_; }
  int rows() const { return h_; }
  int cols() const { return w_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  bool same_shape(const Tensor& o) const {
    return c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator()(int c, int y, int x) {
    return data_[(static_cast<Eigen::Index>(c) * h_ + y) * w_ + x];
  }
  T operator()(int c, int y, int x) const {
    return data_[(static_cast<Eigen::Index>(c) * h_ + y) * w_ + x];
  }

  PlaneView plane(int c) {
    return PlaneView(data_.data() + static_cast<Eigen::Index>(c) * h_ * w_, h_, w_);
  }
  ConstPlaneView plane(int c) const {
    return ConstPlaneView(data_.data() + static_cast<Eigen::Index>(c) * h_ * w_, h_, w_);
  }

  VecView vec() { return VecView(data_.data(), data_.size()); }
  ConstVecView vec() const { return ConstVecView(data_.data(), data_.size()); }

  Vec3<T> pixel3(int y, int x) const {
    return Vec3<T>((*this)(0, y, x), (*this)(1, y, x), (*this)(2, y, x));
  }
  void set_pixel3(int y, int x, const Vec3<T>& v) {
    (*this)(0, y, x) = v[0];
    (*this)(1, y, x) = v[1];
    (*this)(2, y, x) = v[2];
  }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  ArrayX<T> data_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return t.vec().isFinite().all();
}

template <typename T>
T mean(const Tensor<T>& t) {
  return t.vec().mean();
}

/// Mean over channels, collapsing to a single plane.
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& t) {
  Tensor<T> out(1, t.rows(), t.cols());
  for (int c = 0; c < t.channels(); ++c) out.plane(0) += t.plane(c);
  out.plane(0) /= static_cast<T>(t.channels());
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("concat_channels: spatial shape mismatch");
  Tensor<T> out(a.channels() + b.channels(), a.rows(), a.cols());
  for (int c = 0; c < a.channels(); ++c) out.plane(c) = a.plane(c);
  for (int c = 0; c < b.channels(); ++c) out.plane(a.channels() + c) = b.plane(c);
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int first, int count) {
  if (first < 0 || count <= 0 || first + count > t.channels())
    throw std::invalid_argument("slice_channels: bad range");
  Tensor<T> out(count, t.rows(), t.cols());
  for (int c = 0; c < count; ++c) out.plane(c) = t.plane(first + c);
  return out;
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  Tensor<To> out(t.channels(), t.rows(), t.cols());
  out.vec() = t.vec().template cast<To>();
  return out;
}

}  // namespace forge
