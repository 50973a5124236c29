#pragma once

#include "forge/layers.hpp"
#include "forge/material.hpp"
#include "forge/tensor.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace forge {

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

/// Two-stream generator: a shared 5-block strided-conv encoder and two
/// mirrored up-conv decoders with skip connections, one emitting normal +
/// roughness, the other diffuse + specular. Decoder depth equals encoder
/// depth so the output maps match the input tile resolution. Channel widths
/// grow base -> 8*base; instance norm everywhere except the first encoder
/// block and the output heads; leaky-ReLU slope 0.2.
template <typename T = float>
class Generator {
 public:
  static constexpr T kSlope = T(0.2);

  struct StreamCache {
    ConvTransposeCache<T> d5, d4, d3, d2, d1;
    InstanceNormCache<T> n5, n4, n3, n2;
    LeakyReluCache<T> r5, r4, r3, r2;
  };

  struct Cache {
    ConvCache<T> e1, e2, e3, e4, e5;
    InstanceNormCache<T> i2, i3, i4, i5;
    LeakyReluCache<T> a1, a2, a3, a4, a5;
    Tensor<T> x1, x2, x3, x4, x5;  // post-activation encoder features
    StreamCache nr, ds;
    Tensor<T> raw_nr, raw_ds;      // 4-channel head inputs
    SigmoidCache<T> ds_sig, rough_sig;
  };

  explicit Generator(int base_channels = 64) : base_(base_channels) {
    const int b = base_channels;
    enc1_ = Conv2d<T>(3, b, 4, 2, 1);
    enc2_ = Conv2d<T>(b, 2 * b, 4, 2, 1);
    enc3_ = Conv2d<T>(2 * b, 4 * b, 4, 2, 1);
    enc4_ = Conv2d<T>(4 * b, 8 * b, 4, 2, 1);
    enc5_ = Conv2d<T>(8 * b, 8 * b, 4, 2, 1);
    build_stream(nr_);
    build_stream(ds_);
  }

  int base_channels() const { return base_; }

  void init(std::mt19937_64& rng) {
    for (Conv2d<T>* c : {&enc1_, &enc2_, &enc3_, &enc4_, &enc5_}) c->init(rng);
    for (Stream* s : {&nr_, &ds_})
      for (ConvTranspose2d<T>* c : {&s->d5, &s->d4, &s->d3, &s->d2, &s->d1}) c->init(rng);
  }

  /// tile: 3 x S x S with S a power of two >= 64.
  SvbrdfMaps<T> forward(const Tensor<T>& tile, Cache& c) const {
    check_tile(tile);
    c.x1 = leaky_relu(enc1_.forward(tile, c.e1), kSlope, c.a1);
    c.x2 = leaky_relu(inorm_.forward(enc2_.forward(c.x1, c.e2), c.i2), kSlope, c.a2);
    c.x3 = leaky_relu(inorm_.forward(enc3_.forward(c.x2, c.e3), c.i3), kSlope, c.a3);
    c.x4 = leaky_relu(inorm_.forward(enc4_.forward(c.x3, c.e4), c.i4), kSlope, c.a4);
    c.x5 = leaky_relu(inorm_.forward(enc5_.forward(c.x4, c.e5), c.i5), kSlope, c.a5);

    c.raw_nr = run_stream(nr_, c, c.nr);
    c.raw_ds = run_stream(ds_, c, c.ds);

    SvbrdfMaps<T> maps;
    const Tensor<T> ds_act = sigmoid(c.raw_ds, c.ds_sig);
    maps.diffuse = slice_channels(ds_act, 0, 3);
    maps.specular = slice_channels(ds_act, 3, 1);

    const Tensor<T> rough_act = sigmoid(slice_channels(c.raw_nr, 3, 1), c.rough_sig);
    maps.roughness = Tensor<T>(1, tile.rows(), tile.cols());
    maps.roughness.vec() = T(kAlphaMin) + (T(1) - T(kAlphaMin)) * rough_act.vec();

    maps.normal = normalize_normals(slice_channels(c.raw_nr, 0, 3));
    return maps;
  }

  SvbrdfMaps<T> forward(const Tensor<T>& tile) const {
    Cache local;
    return forward(tile, local);
  }

  /// Accumulates parameter gradients from dL/d(maps).
  void backward(const MapsGrad<T>& d_maps, Cache& c) {
    // Heads.
    Tensor<T> d_ds_act = concat_channels(d_maps.diffuse, d_maps.specular);
    Tensor<T> d_raw_ds = sigmoid_backward(d_ds_act, c.ds_sig);

    Tensor<T> d_rough_act(1, d_maps.roughness.rows(), d_maps.roughness.cols());
    d_rough_act.vec() = d_maps.roughness.vec() * (T(1) - T(kAlphaMin));
    const Tensor<T> d_rough_raw = sigmoid_backward(d_rough_act, c.rough_sig);
    const Tensor<T> raw_normal = slice_channels(c.raw_nr, 0, 3);
    const Tensor<T> d_norm_raw = normalize_normals_backward(raw_normal, d_maps.normal);
    Tensor<T> d_raw_nr = concat_channels(d_norm_raw, d_rough_raw);

    // Decoder streams; skip gradients accumulate onto the encoder features.
    Tensor<T> dx1(c.x1.channels(), c.x1.rows(), c.x1.cols());
    Tensor<T> dx2(c.x2.channels(), c.x2.rows(), c.x2.cols());
    Tensor<T> dx3(c.x3.channels(), c.x3.rows(), c.x3.cols());
    Tensor<T> dx4(c.x4.channels(), c.x4.rows(), c.x4.cols());
    Tensor<T> dx5(c.x5.channels(), c.x5.rows(), c.x5.cols());
    stream_backward(nr_, d_raw_nr, c.nr, dx1, dx2, dx3, dx4, dx5);
    stream_backward(ds_, d_raw_ds, c.ds, dx1, dx2, dx3, dx4, dx5);

    // Encoder.
    Tensor<T> g = inorm_.backward(leaky_relu_backward(dx5, kSlope, c.a5), c.i5);
    dx4.vec() += enc5_.backward(g, c.e5).vec();
    g = inorm_.backward(leaky_relu_backward(dx4, kSlope, c.a4), c.i4);
    dx3.vec() += enc4_.backward(g, c.e4).vec();
    g = inorm_.backward(leaky_relu_backward(dx3, kSlope, c.a3), c.i3);
    dx2.vec() += enc3_.backward(g, c.e3).vec();
    g = inorm_.backward(leaky_relu_backward(dx2, kSlope, c.a2), c.i2);
    dx1.vec() += enc2_.backward(g, c.e2).vec();
    enc1_.backward(leaky_relu_backward(dx1, kSlope, c.a1), c.e1, /*need_dx=*/false);
  }

  void zero_grad() {
    for (Conv2d<T>* c : {&enc1_, &enc2_, &enc3_, &enc4_, &enc5_}) c->zero_grad();
    for (Stream* s : {&nr_, &ds_})
      for (ConvTranspose2d<T>* c : {&s->d5, &s->d4, &s->d3, &s->d2, &s->d1}) c->zero_grad();
  }

  void visit_params(const ParamVisitor<T>& v) {
    enc1_.visit_params("gen.enc1", v);
    enc2_.visit_params("gen.enc2", v);
    enc3_.visit_params("gen.enc3", v);
    enc4_.visit_params("gen.enc4", v);
    enc5_.visit_params("gen.enc5", v);
    visit_stream(nr_, "gen.nr", v);
    visit_stream(ds_, "gen.ds", v);
  }

 private:
  struct Stream {
    ConvTranspose2d<T> d5, d4, d3, d2, d1;
  };

  void build_stream(Stream& s) {
    const int b = base_;
    s.d5 = ConvTranspose2d<T>(8 * b, 8 * b, 4, 2, 1);
    s.d4 = ConvTranspose2d<T>(16 * b, 4 * b, 4, 2, 1);
    s.d3 = ConvTranspose2d<T>(8 * b, 2 * b, 4, 2, 1);
    s.d2 = ConvTranspose2d<T>(4 * b, b, 4, 2, 1);
    s.d1 = ConvTranspose2d<T>(2 * b, 4, 4, 2, 1);
  }

  Tensor<T> run_stream(const Stream& s, const Cache& c, StreamCache& sc) const {
    Tensor<T> y = leaky_relu(inorm_.forward(s.d5.forward(c.x5, sc.d5), sc.n5), kSlope, sc.r5);
    y = leaky_relu(inorm_.forward(s.d4.forward(concat_channels(y, c.x4), sc.d4), sc.n4),
                   kSlope, sc.r4);
    y = leaky_relu(inorm_.forward(s.d3.forward(concat_channels(y, c.x3), sc.d3), sc.n3),
                   kSlope, sc.r3);
    y = leaky_relu(inorm_.forward(s.d2.forward(concat_channels(y, c.x2), sc.d2), sc.n2),
                   kSlope, sc.r2);
    return s.d1.forward(concat_channels(y, c.x1), sc.d1);
  }

  void stream_backward(Stream& s, const Tensor<T>& d_raw, StreamCache& sc, Tensor<T>& dx1,
                       Tensor<T>& dx2, Tensor<T>& dx3, Tensor<T>& dx4, Tensor<T>& dx5) {
    const int b = base_;
    Tensor<T> du = s.d1.backward(d_raw, sc.d1);
    dx1.vec() += slice_channels(du, b, b).vec();
    Tensor<T> g = inorm_.backward(leaky_relu_backward(slice_channels(du, 0, b), kSlope, sc.r2),
                                  sc.n2);
    du = s.d2.backward(g, sc.d2);
    dx2.vec() += slice_channels(du, 2 * b, 2 * b).vec();
    g = inorm_.backward(leaky_relu_backward(slice_channels(du, 0, 2 * b), kSlope, sc.r3), sc.n3);
    du = s.d3.backward(g, sc.d3);
    dx3.vec() += slice_channels(du, 4 * b, 4 * b).vec();
    g = inorm_.backward(leaky_relu_backward(slice_channels(du, 0, 4 * b), kSlope, sc.r4), sc.n4);
    du = s.d4.backward(g, sc.d4);
    dx4.vec() += slice_channels(du, 8 * b, 8 * b).vec();
    g = inorm_.backward(leaky_relu_backward(slice_channels(du, 0, 8 * b), kSlope, sc.r5), sc.n5);
    dx5.vec() += s.d5.backward(g, sc.d5).vec();
  }

  void visit_stream(Stream& s, const std::string& prefix, const ParamVisitor<T>& v) {
    s.d5.visit_params(prefix + ".d5", v);
    s.d4.visit_params(prefix + ".d4", v);
    s.d3.visit_params(prefix + ".d3", v);
    s.d2.visit_params(prefix + ".d2", v);
    s.d1.visit_params(prefix + ".d1", v);
  }

  static void check_tile(const Tensor<T>& tile) {
    if (tile.channels() != 3) throw std::invalid_argument("generator: tile must have 3 channels");
    if (tile.rows() != tile.cols() || !is_power_of_two(tile.rows()) || tile.rows() < 64)
      throw std::invalid_argument("generator: tile side must be a power of two >= 64");
  }

  int base_;
  Conv2d<T> enc1_, enc2_, enc3_, enc4_, enc5_;
  Stream nr_, ds_;
  InstanceNorm<T> inorm_;
};

/// PatchGAN discriminator: three stride-2 blocks, one stride-1 block and a
/// 1-channel head (all 4x4), giving each logit a 70x70 receptive field -- a
/// 30x30 logit grid on a 256 tile.
template <typename T = float>
class Discriminator {
 public:
  static constexpr T kSlope = T(0.2);
  static constexpr int kReceptiveField = 70;

  struct Cache {
    ConvCache<T> c1, c2, c3, c4, head;
    InstanceNormCache<T> i2, i3, i4;
    LeakyReluCache<T> a1, a2, a3, a4;
  };

  explicit Discriminator(int base_channels = 64) : base_(base_channels) {
    const int b = base_channels;
    c1_ = Conv2d<T>(3, b, 4, 2, 1);
    c2_ = Conv2d<T>(b, 2 * b, 4, 2, 1);
    c3_ = Conv2d<T>(2 * b, 4 * b, 4, 2, 1);
    c4_ = Conv2d<T>(4 * b, 8 * b, 4, 1, 1);
    head_ = Conv2d<T>(8 * b, 1, 4, 1, 1);
  }

  int base_channels() const { return base_; }

  void init(std::mt19937_64& rng) {
    for (Conv2d<T>* c : {&c1_, &c2_, &c3_, &c4_, &head_}) c->init(rng);
  }

  static int logit_side(int input_side) { return input_side / 8 - 2; }

  Tensor<T> forward(const Tensor<T>& img, Cache& c) const {
    if (img.channels() != 3 || img.rows() != img.cols())
      throw std::invalid_argument("discriminator: expected square 3-channel input");
    if (logit_side(img.rows()) < 1)
      throw std::invalid_argument("discriminator: input side too small");
    Tensor<T> x = leaky_relu(c1_.forward(img, c.c1), kSlope, c.a1);
    x = leaky_relu(inorm_.forward(c2_.forward(x, c.c2), c.i2), kSlope, c.a2);
    x = leaky_relu(inorm_.forward(c3_.forward(x, c.c3), c.i3), kSlope, c.a3);
    x = leaky_relu(inorm_.forward(c4_.forward(x, c.c4), c.i4), kSlope, c.a4);
    return head_.forward(x, c.head);
  }

  Tensor<T> forward(const Tensor<T>& img) const {
    Cache local;
    return forward(img, local);
  }

  /// Returns dL/d(input image); parameter gradients accumulate as usual.
  Tensor<T> backward(const Tensor<T>& d_logits, Cache& c, bool need_dx = true) {
    Tensor<T> g = head_.backward(d_logits, c.head);
    g = inorm_.backward(leaky_relu_backward(g, kSlope, c.a4), c.i4);
    g = c4_.backward(g, c.c4);
    g = inorm_.backward(leaky_relu_backward(g, kSlope, c.a3), c.i3);
    g = c3_.backward(g, c.c3);
    g = inorm_.backward(leaky_relu_backward(g, kSlope, c.a2), c.i2);
    g = c2_.backward(g, c.c2);
    return c1_.backward(leaky_relu_backward(g, kSlope, c.a1), c.c1, need_dx);
  }

  void zero_grad() {
    for (Conv2d<T>* c : {&c1_, &c2_, &c3_, &c4_, &head_}) c->zero_grad();
  }

  void visit_params(const ParamVisitor<T>& v) {
    c1_.visit_params("disc.c1", v);
    c2_.visit_params("disc.c2", v);
    c3_.visit_params("disc.c3", v);
    c4_.visit_params("disc.c4", v);
    head_.visit_params("disc.head", v);
  }

 private:
  int base_;
  Conv2d<T> c1_, c2_, c3_, c4_, head_;
  InstanceNorm<T> inorm_;
};

}  // namespace forge
