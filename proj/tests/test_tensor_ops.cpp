#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ryolo/tensor_ops.hpp"
#include "test_util.hpp"

using namespace ryolo;
using test::random_tensor;

TEST(Tensor4, RejectsZeroDimsAndBadDataLength) {
  EXPECT_THROW(Tensor4(0, 1, 1, 1), Error);
  EXPECT_THROW(Tensor4(1, 1, 0, 1), Error);
  try {
    Tensor4(Shape4{1, 1, 2, 2}, std::vector<double>(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Tensor4, RowMajorIndexing) {
  Tensor4 t(2, 3, 4, 5);
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.index(1, 2, 3, 4), 119u);
  EXPECT_EQ(t.index(0, 1, 0, 0), 20u);
  t(1, 0, 2, 1) = 7.0;
  EXPECT_EQ(t[t.index(1, 0, 2, 1)], 7.0);
}

TEST(Conv2d, IdentityKernelReproducesInput) {
  Rng rng(1);
  const Tensor4 x = random_tensor({2, 3, 5, 4}, rng);
  ConvKernel k(3, 3, 1);
  for (std::size_t c = 0; c < 3; ++c) k.weight(c, c, 0, 0) = 1.0;
  EXPECT_EQ(conv2d_same(x, k), x);
}

TEST(Conv2d, AllOnesReceptiveFieldSums) {
  const Tensor4 x(1, 1, 3, 3, 1.0);
  ConvKernel k(1, 1, 3);
  k.weight.fill(1.0);
  const Tensor4 y = conv2d(x, k, 1);
  ASSERT_EQ(y.shape(), (Shape4{1, 1, 3, 3}));
  EXPECT_EQ(y(0, 0, 1, 1), 9.0);
  for (auto [r, c] : {std::pair{0, 0}, {0, 2}, {2, 0}, {2, 2}}) EXPECT_EQ(y(0, 0, r, c), 4.0);
  for (auto [r, c] : {std::pair{0, 1}, {1, 0}, {1, 2}, {2, 1}}) EXPECT_EQ(y(0, 0, r, c), 6.0);
}

TEST(Conv2d, ZeroKernelAnnihilates) {
  Rng rng(2);
  const Tensor4 x = random_tensor({1, 2, 6, 6}, rng);
  const Tensor4 y = conv2d_same(x, ConvKernel(4, 2, 3));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, BiasAddedPerOutputChannel) {
  ConvKernel k(2, 1, 3);
  k.bias[0] = 0.5;
  k.bias[1] = -2.0;
  const Tensor4 y = conv2d_same(Tensor4(1, 1, 4, 4, 3.0), k);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(y.plane(0, 0)[i], 0.5);
    EXPECT_EQ(y.plane(0, 1)[i], -2.0);
  }
}

TEST(Conv2d, RejectsChannelMismatchAndEvenKernel) {
  try {
    conv2d_same(Tensor4(1, 2, 4, 4), ConvKernel(1, 3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("input channels"), std::string::npos);
  }
  EXPECT_THROW(ConvKernel(1, 1, 2), Error);
  EXPECT_THROW(conv2d(Tensor4(1, 1, 4, 4), Tensor4(1, 1, 2, 2), Tensor4(1, 1, 1, 1), 0), Error);
}

TEST(Conv2d, SamePaddingPreservesSpatialDims) {
  Rng rng(3);
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    for (std::size_t h : {1u, 2u, 5u, 8u}) {
      const Tensor4 x = random_tensor({1, 2, h, h + 1}, rng);
      ConvKernel kern(3, 2, k);
      kern.weight = random_tensor(kern.weight.shape(), rng);
      const Tensor4 y = conv2d_same(x, kern);
      EXPECT_EQ(y.h(), h);
      EXPECT_EQ(y.w(), h + 1);
    }
  }
}

TEST(Conv2d, LinearInInput) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape4 s{2, 2, 5, 6};
    const Tensor4 x = random_tensor(s, rng), y = random_tensor(s, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    ConvKernel k(3, 2, 3);
    k.weight = random_tensor(k.weight.shape(), rng);
    k.bias = random_tensor(k.bias.shape(), rng);
    ConvKernel nobias = k;
    nobias.bias.fill(0.0);

    Tensor4 mix(s);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const Tensor4 lhs = conv2d_same(mix, k);
    const Tensor4 cx = conv2d_same(x, nobias), cy = conv2d_same(y, nobias);
    for (std::size_t n = 0; n < lhs.n(); ++n) {
      for (std::size_t c = 0; c < lhs.c(); ++c) {
        for (std::size_t i = 0; i < lhs.h() * lhs.w(); ++i) {
          const double rhs = a * cx.plane(n, c)[i] + b * cy.plane(n, c)[i] + k.bias[c];
          EXPECT_NEAR(lhs.plane(n, c)[i], rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
        }
      }
    }
  }
}

TEST(Conv2d, TranslationEquivariantAwayFromBorders) {
  Rng rng(5);
  ConvKernel k(2, 1, 3);
  k.weight = random_tensor(k.weight.shape(), rng);
  Tensor4 x(1, 1, 12, 12), shifted(1, 1, 12, 12);
  for (std::size_t y = 3; y < 7; ++y) {
    for (std::size_t xx = 3; xx < 7; ++xx) {
      x(0, 0, y, xx) = rng.uniform(-1, 1);
      shifted(0, 0, y + 2, xx + 1) = x(0, 0, y, xx);
    }
  }
  const Tensor4 a = conv2d_same(x, k), b = conv2d_same(shifted, k);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t y = 0; y < 10; ++y) {
      for (std::size_t xx = 0; xx < 11; ++xx) EXPECT_EQ(a(0, c, y, xx), b(0, c, y + 2, xx + 1));
    }
  }
}

TEST(Conv2d, BackwardMatchesCentralDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + 2 * rng.index(2);
    const Shape4 xs{1 + rng.index(2), 1 + rng.index(3), 2 + rng.index(4), 2 + rng.index(4)};
    const std::size_t co = 1 + rng.index(3);
    const std::size_t pad = same_padding(k);
    const Tensor4 x = random_tensor(xs, rng);
    const Tensor4 w = random_tensor({co, xs.c, k, k}, rng);
    const Tensor4 b = random_tensor({1, co, 1, 1}, rng);
    const Tensor4 proj = random_tensor(conv2d(x, w, b, pad).shape(), rng);

    const Tensor4 gx = conv2d_backward_input(xs, w, proj, pad);
    Tensor4 gw(w.shape()), gb(b.shape());
    conv2d_backward_kernel(x, proj, pad, gw, gb);

    const auto nx = numeric_gradient(
        [&](std::span<const double> p) { return test::dot(conv2d(test::unflat(xs, p), w, b, pad), proj); },
        x.values(), 1e-5);
    const auto nw = numeric_gradient(
        [&](std::span<const double> p) { return test::dot(conv2d(x, test::unflat(w.shape(), p), b, pad), proj); },
        w.values(), 1e-5);
    const auto nb = numeric_gradient(
        [&](std::span<const double> p) { return test::dot(conv2d(x, w, test::unflat(b.shape(), p), pad), proj); },
        b.values(), 1e-5);
    EXPECT_LE(max_relative_error(gx.values(), nx), 1e-4);
    EXPECT_LE(max_relative_error(gw.values(), nw), 1e-4);
    EXPECT_LE(max_relative_error(gb.values(), nb), 1e-4);
  }
}

TEST(Elementwise, FixedPointsAndIdentities) {
  Rng rng(7);
  const Tensor4 zero(1, 2, 3, 3);
  const Tensor4 s = sigmoid(zero), t = ryolo::tanh(zero);
  for (double v : s.values()) EXPECT_EQ(v, 0.5);
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
  const Tensor4 x = random_tensor({1, 2, 3, 3}, rng);
  EXPECT_EQ(hadamard(x, Tensor4(x.shape(), 1.0)), x);
  EXPECT_EQ(add(x, zero), x);
  EXPECT_THROW(hadamard(x, Tensor4(1, 2, 3, 4)), Error);
  EXPECT_THROW(add(x, Tensor4(2, 2, 3, 3)), Error);
}

TEST(Elementwise, OpenRangesForFiniteInputs) {
  Rng rng(8);
  Tensor4 x = random_tensor({1, 1, 10, 10}, rng, -30.0, 30.0);
  x[0] = 1e300;
  x[1] = -1e300;
  const Tensor4 sx = sigmoid(x);
  for (double v : sx.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_TRUE(std::isfinite(v));
  }
  const Tensor4 small = random_tensor({1, 1, 10, 10}, rng, -15.0, 15.0);
  const Tensor4 ss = sigmoid(small), ts = ryolo::tanh(small);
  for (double v : ss.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  for (double v : ts.values()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_TRUE(std::isfinite(softplus(1000.0)));
  EXPECT_NEAR(softplus(1000.0), 1000.0, 1e-12);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
}

TEST(MaxPool, CeilModeShapeAndValues) {
  Tensor4 x(1, 1, 3, 5);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const Tensor4 y = max_pool2(x);
  ASSERT_EQ(y.shape(), (Shape4{1, 1, 2, 3}));
  EXPECT_EQ(y(0, 0, 0, 0), 6.0);
  EXPECT_EQ(y(0, 0, 0, 2), 9.0);
  EXPECT_EQ(y(0, 0, 1, 0), 11.0);
  EXPECT_EQ(y(0, 0, 1, 2), 14.0);
  for (std::size_t h : {104u, 52u, 26u, 13u, 7u}) {
    EXPECT_EQ(max_pool2_shape({1, 1, h, h}).h, (h + 1) / 2);
  }
}

TEST(MaxPool, BackwardMatchesCentralDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape4 s{1, 2, 2 + rng.index(4), 2 + rng.index(4)};
    const Tensor4 x = random_tensor(s, rng);
    const Tensor4 proj = random_tensor(max_pool2_shape(s), rng);
    const Tensor4 g = max_pool2_backward(x, proj);
    // Step far below the gap between distinct random values keeps argmaxes fixed.
    const auto num = numeric_gradient(
        [&](std::span<const double> p) { return test::dot(max_pool2(test::unflat(s, p)), proj); }, x.values(),
        1e-7);
    EXPECT_LE(max_relative_error(g.values(), num), 1e-4);
  }
}

TEST(Batch, SliceConcatRoundTrip) {
  Rng rng(10);
  const Tensor4 x = random_tensor({3, 2, 2, 3}, rng);
  std::vector<Tensor4> parts;
  for (std::size_t i = 0; i < 3; ++i) parts.push_back(batch_slice(x, i));
  std::vector<const Tensor4*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  EXPECT_EQ(batch_concat(ptrs), x);
  EXPECT_THROW(batch_slice(x, 3), Error);
}

TEST(NumericGradient, SquareAndConstant) {
  const std::vector<double> p{3.0};
  const auto g = numeric_gradient([](std::span<const double> q) { return q[0] * q[0]; }, p, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
  const std::vector<double> q{1.0, -2.0, 0.5};
  for (double v : numeric_gradient([](std::span<const double>) { return 4.2; }, q, 1e-5)) EXPECT_EQ(v, 0.0);
}

TEST(NumericGradient, NonFiniteNamesCoordinate) {
  const std::vector<double> p{1.0, 1e-6};
  try {
    numeric_gradient([](std::span<const double> q) { return std::log(q[1]); }, p, 1e-5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
  EXPECT_THROW(numeric_gradient([](std::span<const double>) { return 0.0; }, p, 0.0), Error);
}
