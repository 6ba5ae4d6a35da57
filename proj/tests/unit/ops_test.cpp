#include <gtest/gtest.h>

#include <cmath>

#include "ltnn/errors.hpp"
#include "ltnn/ops.hpp"
#include "test_support.hpp"

namespace ltnn {
namespace {

using testing::random_tensor;
using testing::values;

// Direct nested-loop cross-correlation.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                                int pad) {
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (H + 2 * pad - kh) / stride + 1, ow = (W + 2 * pad - kw) / stride + 1;
  std::vector<double> out(N * O * oh * ow);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
          double s = b.defined() ? b.data()[o] : 0.0;
          for (std::size_t ci = 0; ci < C; ++ci)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t e = 0; e < kw; ++e) {
                const long y = long(r * stride + a) - pad, xx = long(c * stride + e) - pad;
                if (y < 0 || xx < 0 || y >= long(H) || xx >= long(W)) continue;
                s += x.at({n, ci, std::size_t(y), std::size_t(xx)}) * w.at({o, ci, a, e});
              }
          out[((n * O + o) * oh + r) * ow + c] = s;
        }
  return out;
}

// Scatter-accumulate definition of the transposed convolution.
std::vector<double> transpose_oracle(const Tensor& x, const Tensor& w, int stride, int pad) {
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const long oh = long((H - 1) * stride + kh) - 2 * pad, ow = long((W - 1) * stride + kw) - 2 * pad;
  std::vector<double> out(N * O * oh * ow, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t ci = 0; ci < C; ++ci)
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
          for (std::size_t o = 0; o < O; ++o)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t e = 0; e < kw; ++e) {
                const long y = long(r * stride + a) - pad, xx = long(c * stride + e) - pad;
                if (y < 0 || xx < 0 || y >= oh || xx >= ow) continue;
                out[((n * O + o) * oh + y) * ow + xx] += x.at({n, ci, r, c}) * w.at({ci, o, a, e});
              }
  return out;
}

TEST(Conv2d, TwoByTwoExample) {
  const Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor w = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1});
  const Tensor y = conv2d(x, w, Tensor::zeros({1}), 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 5);
}

TEST(Conv2d, ZeroKernelGivesZeros) {
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 5, 5}, rng);
  const Tensor y = conv2d(x, Tensor::zeros({4, 3, 3, 3}), Tensor::zeros({4}), 1, 1);
  for (Real v : y.data()) EXPECT_EQ(v, 0);
}

TEST(Conv2d, ImpulseResponseIsFlippedKernel) {
  std::vector<Real> impulse(9, 0);
  impulse[4] = 1;
  const Tensor x = Tensor::from({1, 1, 3, 3}, impulse);
  const Tensor k = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor y = conv2d(x, k, Tensor(), 1, 1);
  const std::vector<Real> flipped{9, 8, 7, 6, 5, 4, 3, 2, 1};
  EXPECT_EQ(values(y), flipped);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(11);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1, 2}) {
      const Tensor x = random_tensor({2, 3, 7, 6}, rng);
      const Tensor w = random_tensor({4, 3, 3, 3}, rng);
      const Tensor b = random_tensor({4}, rng);
      const Tensor y = conv2d(x, w, b, stride, pad);
      const auto expected = conv_oracle(x, w, b, stride, pad);
      ASSERT_EQ(y.numel(), expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.data()[i], expected[i], 1e-12);
    }
  }
}

TEST(Conv2d, SamePaddingPreservesShape) {
  Rng rng(5);
  for (int k : {1, 3, 5}) {
    const Tensor y = conv2d(random_tensor({1, 2, 9, 7}, rng), random_tensor({3, 2, Shape::value_type(k), Shape::value_type(k)}, rng),
                            Tensor(), 1, (k - 1) / 2);
    EXPECT_EQ(y.shape(), (Shape{1, 3, 9, 7}));
  }
}

TEST(Conv2d, ChannelMismatchReportsBothShapes) {
  const Tensor x = Tensor::zeros({1, 3, 4, 4});
  const Tensor w = Tensor::zeros({2, 5, 3, 3});
  try {
    conv2d(x, w, Tensor(), 1, 1);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(to_string(x.shape())), std::string::npos) << msg;
    EXPECT_NE(msg.find(to_string(w.shape())), std::string::npos) << msg;
  }
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), Tensor(), 1, 0),
               DimensionError);
}

TEST(Conv2dTranspose, ScatterExample) {
  const Tensor y = conv2d_transpose(Tensor::from({1, 1, 1, 1}, {2}),
                                    Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4}), Tensor(), 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(values(y), (std::vector<Real>{2, 4, 6, 8}));
}

TEST(Conv2dTranspose, MatchesScatterOracle) {
  Rng rng(21);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      const Tensor x = random_tensor({2, 3, 4, 5}, rng);
      const Tensor w = random_tensor({3, 2, 4, 4}, rng);
      const Tensor y = conv2d_transpose(x, w, Tensor(), stride, pad);
      const auto expected = transpose_oracle(x, w, stride, pad);
      ASSERT_EQ(y.numel(), expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.data()[i], expected[i], 1e-12);
    }
  }
}

TEST(Conv2dTranspose, IsAdjointOfConv2d) {
  // <conv(x), u> == <x, conv_transpose(u)> for the same weights and geometry.
  Rng rng(8);
  const Tensor w = random_tensor({3, 2, 4, 4}, rng);
  const Tensor x = random_tensor({1, 2, 8, 8}, rng);
  const Tensor cx = conv2d(x, w, Tensor(), 2, 1);
  const Tensor u = random_tensor(cx.shape(), rng);
  // conv2d weight is Cout x Cin; the transpose takes it as Cin' x Cout' with Cin' = Cout.
  const Tensor tu = conv2d_transpose(u, w, Tensor(), 2, 1);
  ASSERT_EQ(tu.shape(), x.shape());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx.data()[i] * u.data()[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * tu.data()[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Conv2dTranspose, ZeroInputAndShapeRoundTrip) {
  Rng rng(2);
  const Tensor w = random_tensor({4, 4, 4, 4}, rng);
  const Tensor y = conv2d_transpose(Tensor::zeros({1, 4, 3, 3}), w, Tensor(), 2, 1);
  for (Real v : y.data()) EXPECT_EQ(v, 0);
  const Tensor x = random_tensor({1, 4, 16, 16}, rng);
  const Tensor down = conv2d(x, w, Tensor(), 2, 1);
  EXPECT_EQ(conv2d_transpose(down, w, Tensor(), 2, 1).shape(), x.shape());
}

TEST(BilinearUpsample, HalfPixelOracle) {
  const double a = 1.5, b = -2.0;
  const Tensor y = bilinear_upsample(Tensor::from({1, 1, 2, 1}, {a, b}), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 2}));
  // Rows sample source y = max(0, (d + 0.5) / 2 - 0.5): 0, 0.25, 0.75, 1.25 -> clamp.
  const double expected[4] = {a, 0.75 * a + 0.25 * b, 0.25 * a + 0.75 * b, b};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(y.at({0, 0, std::size_t(r), std::size_t(c)}), expected[r]);
  }
}

TEST(BilinearUpsample, ConstantsAndIdentity) {
  Rng rng(4);
  const Tensor c = Tensor::filled({2, 3, 3, 5}, 0.37);
  const Tensor up = bilinear_upsample(c, 3);
  for (Real v : up.data()) EXPECT_DOUBLE_EQ(v, 0.37);
  const Tensor x = random_tensor({1, 2, 4, 4}, rng);
  EXPECT_EQ(values(bilinear_upsample(x, 1)), values(x));
  EXPECT_THROW(bilinear_upsample(x, 0), std::invalid_argument);
}

TEST(Swish, ScalarValues) {
  const Tensor one = Tensor::scalar(1);
  EXPECT_NEAR(swish(Tensor::from({1}, {1}), Tensor::scalar(1)).item(), 1 / (1 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(swish(Tensor::from({1}, {1}), one).item(), 0.7311, 1e-4);
  EXPECT_EQ(swish(Tensor::from({1}, {0}), Tensor::scalar(3.7)).item(), 0);
  const Tensor x = Tensor::from({3}, {-2, 0.5, 4});
  const Tensor y = swish(x, Tensor::scalar(0));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i] / 2);
}

TEST(Sigmoid, ValuesSymmetryAndSaturation) {
  EXPECT_EQ(sigmoid(Tensor::from({1}, {0})).item(), 0.5);
  Rng rng(6);
  const Tensor x = random_tensor({20}, rng, -6, 6);
  const Tensor s = sigmoid(x), sn = sigmoid(scale(x, -1));
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(sn.data()[i], 1 - s.data()[i], 1e-15);
  const Tensor big = sigmoid(Tensor::from({4}, {-50, 50, -1000, 1000}));
  for (Real v : big.data()) {
    EXPECT_GT(v, 0);
    EXPECT_LT(v, 1);
  }
}

TEST(Shift, ClampIndexOracle) {
  const Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(shift(x, 1, 0)), (std::vector<Real>{1, 2, 1, 2}));
  EXPECT_EQ(values(shift(x, 0, 1)), (std::vector<Real>{1, 1, 3, 3}));
  EXPECT_EQ(values(shift(x, -1, -1)), (std::vector<Real>{4, 4, 4, 4}));
  EXPECT_EQ(values(shift(x, 0, 0)), values(x));
  EXPECT_THROW(shift(x, 2, 0), std::invalid_argument);
  EXPECT_THROW(shift(x, 0, -2), std::invalid_argument);
}

TEST(Shift, ConstantImageIsInvariant) {
  const Tensor c = Tensor::filled({1, 2, 4, 3}, -0.25);
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) EXPECT_EQ(values(shift(c, i, j)), values(c));
}

TEST(Backward, SumAndQuadraticGradients) {
  Rng rng(1);
  Tensor x = random_tensor({2, 3}, rng);
  x.set_requires_grad(true);
  {
    Tape tape;
    TapeScope scope(tape);
    backward(sum(x));
    for (Real g : x.grad()) EXPECT_EQ(g, 1);
  }
  x.clear_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    backward(sum(mul(x, x)));
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x.grad()[i], 2 * x.data()[i]);
  }
}

TEST(Backward, FanOutAccumulatesExactly) {
  Rng rng(12);
  Tensor x = random_tensor({1, 1, 3, 3}, rng);
  x.set_requires_grad(true);
  auto f = [](const Tensor& t) { return sum(square(t)); };
  auto g = [](const Tensor& t) { return sum(swish(t, Tensor::scalar(1))); };
  std::vector<Real> gf, gg;
  for (int pass = 0; pass < 3; ++pass) {
    x.clear_grad();
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = pass == 0 ? f(x) : pass == 1 ? g(x) : add(f(x), g(x));
    backward(loss);
    if (pass == 0) gf.assign(x.grad().begin(), x.grad().end());
    if (pass == 1) gg.assign(x.grad().begin(), x.grad().end());
    if (pass == 2) {
      for (std::size_t i = 0; i < gf.size(); ++i) EXPECT_EQ(x.grad()[i], gf[i] + gg[i]);
    }
  }
}

TEST(Ops, PureForward) {
  Rng rng(9);
  const Tensor x = random_tensor({2, 3, 6, 6}, rng);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng);
  EXPECT_EQ(values(conv2d(x, w, Tensor(), 1, 1)), values(conv2d(x, w, Tensor(), 1, 1)));
  EXPECT_EQ(values(bilinear_upsample(x, 2)), values(bilinear_upsample(x, 2)));
}

TEST(Ops, ElementwiseShapeMismatch) {
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  EXPECT_THROW(mul(Tensor::zeros({2, 1}), Tensor::zeros({1, 2})), DimensionError);
  EXPECT_THROW(concat_channels(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 2})), DimensionError);
}

TEST(Ops, GlobalPoolChannelScaleConcat) {
  const Tensor x = Tensor::from({1, 2, 1, 2}, {1, 3, 10, 20});
  EXPECT_EQ(values(global_avg_pool(x)), (std::vector<Real>{2, 15}));
  EXPECT_EQ(values(channel_scale(x, Tensor::from({2}, {2, -1}))), (std::vector<Real>{2, 6, -10, -20}));
  const Tensor c = concat_channels(x, Tensor::from({1, 1, 1, 2}, {7, 8}));
  EXPECT_EQ(values(c), (std::vector<Real>{1, 3, 10, 20, 7, 8}));
}

}  // namespace
}  // namespace ltnn
