#include "forge/layers.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <random>

using namespace forge;
using forge::test::close_rel;
using forge::test::random_tensor;

namespace {

// Pairing <y, R> with a fixed random R turns every layer into a scalar
// functional whose analytic gradient we can check by central differences.
double pair_with(const Tensor<double>& y, const Tensor<double>& r) {
  return (y.vec() * r.vec()).sum();
}

void check_grad_tensor(const Tensor<double>& analytic,
                       const std::function<double(const Tensor<double>&)>& f,
                       const Tensor<double>& x0, int samples, std::mt19937_64& rng,
                       double step = 1e-5, double tol = 1e-6) {
  std::uniform_int_distribution<Eigen::Index> idx(0, x0.size() - 1);
  for (int k = 0; k < samples; ++k) {
    const Eigen::Index i = idx(rng);
    auto g = [&](double v) {
      Tensor<double> t = x0;
      t.data()[i] = v;
      return f(t);
    };
    const double fd = forge::test::central_difference(g, x0.data()[i], step);
    CHECK(close_rel(analytic.data()[i], fd, tol));
  }
}

}  // namespace

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(41);
  const auto x = random_tensor(2, 6, 6, rng, -1.0, 1.0);
  const int k = 4, stride = 2, pad = 1;
  const int ho = detail::conv_out_size(6, k, stride, pad);
  MatrixX<double> cols;
  detail::im2col(x, k, stride, pad, ho, ho, cols);
  MatrixX<double> c = MatrixX<double>::Random(cols.rows(), cols.cols());
  Tensor<double> xt(2, 6, 6);
  detail::col2im(c, k, stride, pad, ho, ho, xt);
  const double lhs = (cols.array() * c.array()).sum();
  const double rhs = (x.vec() * xt.vec()).sum();
  CHECK(close_rel(lhs, rhs, 1e-12));
}

TEST_CASE("Conv2d forward matches a direct convolution loop") {
  std::mt19937_64 rng(43);
  Conv2d<double> conv(2, 3, 4, 2, 1);
  conv.init(rng, 0.5);
  const auto x = random_tensor(2, 8, 8, rng, -1.0, 1.0);
  ConvCache<double> cache;
  const auto y = conv.forward(x, cache);
  REQUIRE(y.rows() == 4);
  for (int co = 0; co < 3; ++co)
    for (int oy = 0; oy < 4; ++oy)
      for (int ox = 0; ox < 4; ++ox) {
        double acc = conv.bias[co];
        for (int ci = 0; ci < 2; ++ci)
          for (int ky = 0; ky < 4; ++ky)
            for (int kx = 0; kx < 4; ++kx) {
              const int yy = oy * 2 - 1 + ky, xx = ox * 2 - 1 + kx;
              if (yy < 0 || yy >= 8 || xx < 0 || xx >= 8) continue;
              acc += conv.weight(co, (ci * 4 + ky) * 4 + kx) * x(ci, yy, xx);
            }
        CHECK(close_rel(y(co, oy, ox), acc, 1e-12));
      }
}

TEST_CASE("Conv2d backward matches finite differences") {
  std::mt19937_64 rng(47);
  Conv2d<double> conv(2, 3, 4, 2, 1);
  conv.init(rng, 0.5);
  const auto x = random_tensor(2, 6, 6, rng, -1.0, 1.0);
  ConvCache<double> cache;
  const auto y0 = conv.forward(x, cache);
  const auto r = random_tensor(y0.channels(), y0.rows(), y0.cols(), rng, -1.0, 1.0);

  conv.zero_grad();
  Tensor<double> dy(r.channels(), r.rows(), r.cols());
  dy.vec() = r.vec();
  const auto dx = conv.backward(dy, cache);

  check_grad_tensor(dx, [&](const Tensor<double>& t) {
    ConvCache<double> c2;
    return pair_with(conv.forward(t, c2), r);
  }, x, 10, rng);

  // Weight and bias gradients.
  std::uniform_int_distribution<Eigen::Index> widx(0, conv.weight.size() - 1);
  for (int k = 0; k < 10; ++k) {
    const Eigen::Index i = widx(rng);
    auto f = [&](double v) {
      Conv2d<double> c2 = conv;
      c2.weight.data()[i] = v;
      ConvCache<double> cc;
      return pair_with(c2.forward(x, cc), r);
    };
    const double fd = forge::test::central_difference(f, conv.weight.data()[i], 1e-5);
    CHECK(close_rel(conv.d_weight.data()[i], fd, 1e-6));
  }
  for (Eigen::Index i = 0; i < conv.bias.size(); ++i) {
    auto f = [&](double v) {
      Conv2d<double> c2 = conv;
      c2.bias[i] = v;
      ConvCache<double> cc;
      return pair_with(c2.forward(x, cc), r);
    };
    const double fd = forge::test::central_difference(f, conv.bias[i], 1e-5);
    CHECK(close_rel(conv.d_bias[i], fd, 1e-6));
  }
}

TEST_CASE("ConvTranspose2d doubles the side and matches finite differences") {
  std::mt19937_64 rng(53);
  ConvTranspose2d<double> conv(3, 2, 4, 2, 1);
  conv.init(rng, 0.5);
  const auto x = random_tensor(3, 5, 5, rng, -1.0, 1.0);
  ConvTransposeCache<double> cache;
  const auto y0 = conv.forward(x, cache);
  CHECK(y0.rows() == 10);
  CHECK(y0.cols() == 10);
  CHECK(y0.channels() == 2);
  const auto r = random_tensor(2, 10, 10, rng, -1.0, 1.0);

  conv.zero_grad();
  Tensor<double> dy = r;
  const auto dx = conv.backward(dy, cache);
  check_grad_tensor(dx, [&](const Tensor<double>& t) {
    ConvTransposeCache<double> c2;
    return pair_with(conv.forward(t, c2), r);
  }, x, 10, rng);

  std::uniform_int_distribution<Eigen::Index> widx(0, conv.weight.size() - 1);
  for (int k = 0; k < 10; ++k) {
    const Eigen::Index i = widx(rng);
    auto f = [&](double v) {
      ConvTranspose2d<double> c2 = conv;
      c2.weight.data()[i] = v;
      ConvTransposeCache<double> cc;
      return pair_with(c2.forward(x, cc), r);
    };
    const double fd = forge::test::central_difference(f, conv.weight.data()[i], 1e-5);
    CHECK(close_rel(conv.d_weight.data()[i], fd, 1e-6));
  }
  for (Eigen::Index i = 0; i < conv.bias.size(); ++i) {
    auto f = [&](double v) {
      ConvTranspose2d<double> c2 = conv;
      c2.bias[i] = v;
      ConvTransposeCache<double> cc;
      return pair_with(c2.forward(x, cc), r);
    };
    const double fd = forge::test::central_difference(f, conv.bias[i], 1e-5);
    CHECK(close_rel(conv.d_bias[i], fd, 1e-6));
  }
}

TEST_CASE("InstanceNorm: zero mean, unit variance, FD-correct backward") {
  std::mt19937_64 rng(59);
  InstanceNorm<double> norm;
  const auto x = random_tensor(3, 6, 6, rng, -2.0, 2.0);
  InstanceNormCache<double> cache;
  const auto y = norm.forward(x, cache);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(y.plane(c).mean()) < 1e-12);
    CHECK(y.plane(c).square().mean() == doctest::Approx(1.0).epsilon(1e-3));
  }
  const auto r = random_tensor(3, 6, 6, rng, -1.0, 1.0);
  const auto dx = norm.backward(r, cache);
  check_grad_tensor(dx, [&](const Tensor<double>& t) {
    InstanceNormCache<double> c2;
    return pair_with(norm.forward(t, c2), r);
  }, x, 12, rng, 1e-5, 1e-4);
}

TEST_CASE("LeakyReLU and Sigmoid backward match finite differences") {
  std::mt19937_64 rng(61);
  const auto x = random_tensor(2, 5, 5, rng, -1.0, 1.0);
  const auto r = random_tensor(2, 5, 5, rng, -1.0, 1.0);

  LeakyReluCache<double> lc;
  leaky_relu(x, 0.2, lc);
  const auto dlx = leaky_relu_backward(r, 0.2, lc);
  check_grad_tensor(dlx, [&](const Tensor<double>& t) {
    LeakyReluCache<double> c2;
    return pair_with(leaky_relu(t, 0.2, c2), r);
  }, x, 10, rng, 1e-7, 1e-4);

  SigmoidCache<double> sc;
  sigmoid(x, sc);
  const auto dsx = sigmoid_backward(r, sc);
  check_grad_tensor(dsx, [&](const Tensor<double>& t) {
    SigmoidCache<double> c2;
    return pair_with(sigmoid(t, c2), r);
  }, x, 10, rng, 1e-5, 1e-6);
}

TEST_CASE("max_pool2: forward picks maxima, backward routes to argmax") {
  std::mt19937_64 rng(67);
  const auto x = random_tensor(2, 6, 6, rng, -1.0, 1.0);
  MaxPoolCache<double> cache;
  const auto y = max_pool2(x, cache);
  REQUIRE(y.rows() == 3);
  for (int c = 0; c < 2; ++c)
    for (int oy = 0; oy < 3; ++oy)
      for (int ox = 0; ox < 3; ++ox) {
        const double want = std::max({x(c, 2 * oy, 2 * ox), x(c, 2 * oy, 2 * ox + 1),
                                      x(c, 2 * oy + 1, 2 * ox), x(c, 2 * oy + 1, 2 * ox + 1)});
        CHECK(y(c, oy, ox) == want);
      }
  const auto r = random_tensor(2, 3, 3, rng, -1.0, 1.0);
  const auto dx = max_pool2_backward(r, cache);
  check_grad_tensor(dx, [&](const Tensor<double>& t) {
    MaxPoolCache<double> c2;
    return pair_with(max_pool2(t, c2), r);
  }, x, 12, rng, 1e-7, 1e-4);
}
