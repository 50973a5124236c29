#pragma once

#include "forge/layers.hpp"
#include "forge/tensor.hpp"

#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace forge {

namespace detail {

template <typename V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw std::runtime_error("feature extractor file: truncated");
  return v;
}

}  // namespace detail

/// Fixed convolutional feature stack for the perceptual loss: 3x3/stride-1
/// conv + ReLU layers interleaved with 2x2 max pools, tapping named
/// activations as feature maps. Weights come from a binary file (see
/// docs/feature-weights.md); they are never trained here. The stack expects
/// display-encoded RGB in [0,1] and applies the usual ImageNet channel
/// normalization.
template <typename T>
class FeatureExtractor {
 public:
  struct Layer {
    enum class Kind : uint8_t { Conv = 0, Pool = 1 };
    Kind kind = Kind::Conv;
    bool tap = false;
    Conv2d<T> conv;
  };

  struct Cache {
    Tensor<T> normalized;
    std::vector<ConvCache<T>> conv;
    std::vector<LeakyReluCache<T>> relu;
    std::vector<MaxPoolCache<T>> pool;
  };

  bool empty() const { return layers_.empty(); }
  int tap_count() const {
    int n = 0;
    for (const auto& l : layers_) n += l.tap ? 1 : 0;
    return n;
  }

  /// Feature maps at every tapped layer, shallow to deep.
  std::vector<Tensor<T>> forward(const Tensor<T>& rgb, Cache& cache) const {
    if (empty()) throw std::runtime_error("feature extractor unavailable");
    cache.conv.assign(layers_.size(), {});
    cache.relu.assign(layers_.size(), {});
    cache.pool.assign(layers_.size(), {});
    cache.normalized = normalize(rgb);
    Tensor<T> x = cache.normalized;
    std::vector<Tensor<T>> taps;
    for (size_t i = 0; i < layers_.size(); ++i) {
      const Layer& l = layers_[i];
      if (l.kind == Layer::Kind::Conv) {
        x = l.conv.forward(x, cache.conv[i]);
        x = leaky_relu(x, T(0), cache.relu[i]);
      } else {
        x = max_pool2(x, cache.pool[i]);
      }
      if (l.tap) taps.push_back(x);
    }
    return taps;
  }

  /// Gradient w.r.t. the input image given gradients at every tap.
  Tensor<T> backward(const std::vector<Tensor<T>>& d_taps, const Cache& cache) const {
    int tap_idx = tap_count() - 1;
    Tensor<T> g;
    for (size_t ri = layers_.size(); ri-- > 0;) {
      const Layer& l = layers_[ri];
      if (l.tap) {
        const Tensor<T>& dt = d_taps[static_cast<size_t>(tap_idx--)];
        if (g.empty())
          g = dt;
        else
          g.vec() += dt.vec();
      }
      if (l.kind == Layer::Kind::Conv) {
        g = leaky_relu_backward(g, T(0), cache.relu[ri]);
        // Weights are frozen; only the input gradient matters here.
        g = const_cast<Conv2d<T>&>(l.conv).backward(g, cache.conv[ri], true);
      } else {
        g = max_pool2_backward(g, cache.pool[ri]);
      }
    }
    for (int c = 0; c < 3; ++c) g.plane(c) /= kStd[c];
    return g;
  }

  static FeatureExtractor load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("feature extractor unavailable: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "SVFX")
      throw std::runtime_error("feature extractor file: bad magic");
    const auto version = detail::read_pod<uint32_t>(is);
    if (version != 1)
      throw std::runtime_error("feature extractor file: unsupported version " +
                               std::to_string(version));
    const auto n = detail::read_pod<uint32_t>(is);
    FeatureExtractor fx;
    for (uint32_t i = 0; i < n; ++i) {
      Layer l;
      l.kind = static_cast<typename Layer::Kind>(detail::read_pod<uint8_t>(is));
      l.tap = detail::read_pod<uint8_t>(is) != 0;
      if (l.kind == Layer::Kind::Conv) {
        const auto out_ch = detail::read_pod<uint32_t>(is);
        const auto in_ch = detail::read_pod<uint32_t>(is);
        l.conv = Conv2d<T>(static_cast<int>(in_ch), static_cast<int>(out_ch), 3, 1, 1);
        // Row-major (out, in, ky, kx) on disk; the weight matrix column
        // index (in*3 + ky)*3 + kx matches that flattening per row.
        for (Eigen::Index j = 0; j < l.conv.weight.size(); ++j) {
          const float v = detail::read_pod<float>(is);
          l.conv.weight(j / l.conv.weight.cols(), j % l.conv.weight.cols()) = static_cast<T>(v);
        }
        for (Eigen::Index j = 0; j < l.conv.bias.size(); ++j)
          l.conv.bias[j] = static_cast<T>(detail::read_pod<float>(is));
      }
      fx.layers_.push_back(std::move(l));
    }
    if (fx.tap_count() == 0) throw std::runtime_error("feature extractor file: no tap layers");
    return fx;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write("SVFX", 4);
    detail::write_pod(os, uint32_t{1});
    detail::write_pod(os, static_cast<uint32_t>(layers_.size()));
    for (const auto& l : layers_) {
      detail::write_pod(os, static_cast<uint8_t>(l.kind));
      detail::write_pod(os, static_cast<uint8_t>(l.tap ? 1 : 0));
      if (l.kind == Layer::Kind::Conv) {
        detail::write_pod(os, static_cast<uint32_t>(l.conv.weight.rows()));
        detail::write_pod(os, static_cast<uint32_t>(l.conv.weight.cols() / 9));
        for (Eigen::Index j = 0; j < l.conv.weight.size(); ++j)
          detail::write_pod(os, static_cast<float>(l.conv.weight(j / l.conv.weight.cols(),
                                                                 j % l.conv.weight.cols())));
        for (Eigen::Index j = 0; j < l.conv.bias.size(); ++j)
          detail::write_pod(os, static_cast<float>(l.conv.bias[j]));
      }
    }
  }

  /// Small seeded stack (conv widths with a pool between stages, every conv
  /// tapped). Useful where no published classifier weights are on disk.
  static FeatureExtractor random(uint64_t seed, const std::vector<int>& widths = {8, 16, 32}) {
    std::mt19937_64 rng(seed);
    FeatureExtractor fx;
    int in_ch = 3;
    for (size_t i = 0; i < widths.size(); ++i) {
      Layer l;
      l.kind = Layer::Kind::Conv;
      l.tap = true;
      l.conv = Conv2d<T>(in_ch, widths[i], 3, 1, 1);
      // He-style scale keeps activations from dying through the stack.
      l.conv.init(rng, T(std::sqrt(2.0 / (9.0 * in_ch))));
      in_ch = widths[i];
      fx.layers_.push_back(std::move(l));
      if (i + 1 < widths.size()) {
        Layer p;
        p.kind = Layer::Kind::Pool;
        fx.layers_.push_back(std::move(p));
      }
    }
    return fx;
  }

 private:
  Tensor<T> normalize(const Tensor<T>& rgb) const {
    Tensor<T> out(3, rgb.rows(), rgb.cols());
    for (int c = 0; c < 3; ++c) out.plane(c) = (rgb.plane(c) - kMean[c]) / kStd[c];
    return out;
  }

  static constexpr T kMean[3] = {T(0.485), T(0.456), T(0.406)};
  static constexpr T kStd[3] = {T(0.229), T(0.224), T(0.225)};

  std::vector<Layer> layers_;
};

}  // namespace forge
