#include <gtest/gtest.h>

#include <cmath>

#include "ltnn/errors.hpp"
#include "ltnn/metrics.hpp"
#include "test_support.hpp"

namespace ltnn {
namespace {

using testing::random_tensor;

TEST(Metrics, L1Basics) {
  Rng rng(1);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng, 0, 1);
  EXPECT_EQ(metric_l1(x, x), 0);
  EXPECT_EQ(metric_l1(Tensor::zeros({3, 4, 4}), Tensor::filled({3, 4, 4}, 1)), 1);
  std::vector<Real> half(2 * 8, 0.2);
  for (std::size_t i = 0; i < half.size(); i += 2) half[i] = 0.7;
  EXPECT_DOUBLE_EQ(metric_l1(Tensor::from({1, 1, 2, 8}, half), Tensor::filled({1, 1, 2, 8}, 0.2)), 0.25);
  EXPECT_THROW(metric_l1(x, Tensor::zeros({2, 3, 4, 5})), DimensionError);
}

TEST(Metrics, MaskedL1IgnoresBackground) {
  Rng rng(2);
  const Tensor t = random_tensor({2, 3, 5, 5}, rng, 0, 1);
  std::vector<Real> p(t.data().begin(), t.data().end());
  std::vector<Real> m(2 * 25, 0);
  // Large error outside the mask, a single masked pixel off by 0.3 in every channel.
  for (std::size_t c = 0; c < 3; ++c) p[c * 25 + 0] += 5;
  m[25 + 7] = 1;
  for (std::size_t c = 0; c < 3; ++c) p[(3 + c) * 25 + 7] += 0.3;
  const Tensor pred = Tensor::from(t.shape(), p), mask = Tensor::from({2, 1, 5, 5}, m);
  EXPECT_NEAR(metric_l1_masked(pred, t, mask), 0.3, 1e-12);

  const Tensor ones = Tensor::filled({2, 1, 5, 5}, 1);
  EXPECT_EQ(metric_l1_masked(pred, t, ones), metric_l1(pred, t));
  EXPECT_THROW(metric_l1_masked(pred, t, Tensor::zeros({2, 1, 5, 5})), std::invalid_argument);
  EXPECT_THROW(metric_l1_masked(pred, t, Tensor::filled({2, 1, 5, 5}, 0.5)), std::invalid_argument);
  EXPECT_THROW(metric_l1_masked(pred, t, Tensor::filled({2, 3, 5, 5}, 1)), DimensionError);
}

// Direct 2D window sums with explicit mean-removed moments.
double ssim_oracle(const Tensor& a, const Tensor& b) {
  const std::size_t H = a.dim(1), W = a.dim(2);
  auto lum = [&](const Tensor& t, std::size_t r, std::size_t q) {
    if (t.dim(0) == 1) return double(t.at({0, r, q}));
    return 0.299 * t.at({0, r, q}) + 0.587 * t.at({1, r, q}) + 0.114 * t.at({2, r, q});
  };
  double g[11], gs = 0;
  for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-(i - 5.0) * (i - 5.0) / 4.5);
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  std::size_t windows = 0;
  for (std::size_t r = 0; r + 11 <= H; ++r) {
    for (std::size_t q = 0; q + 11 <= W; ++q) {
      double ma = 0, mb = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i] * g[j] / (gs * gs);
          ma += w * lum(a, r + i, q + j);
          mb += w * lum(b, r + i, q + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i] * g[j] / (gs * gs);
          const double da = lum(a, r + i, q + j) - ma, db = lum(b, r + i, q + j) - mb;
          va += w * da * da;
          vb += w * db * db;
          cov += w * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / double(windows);
}

TEST(Metrics, SsimMatchesWindowOracle) {
  Rng rng(3);
  for (std::size_t channels : {1u, 3u}) {
    const Tensor a = random_tensor({channels, 16, 14}, rng, 0, 1);
    Tensor b = random_tensor({channels, 16, 14}, rng, 0, 1);
    EXPECT_NEAR(metric_ssim(a, b), ssim_oracle(a, b), 1e-10);
    // A correlated pair scores higher than independent noise.
    std::vector<Real> mix(a.numel());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 0.8 * a.data()[i] + 0.2 * b.data()[i];
    const Tensor c = Tensor::from(a.shape(), mix);
    EXPECT_NEAR(metric_ssim(a, c), ssim_oracle(a, c), 1e-10);
    EXPECT_GT(metric_ssim(a, c), metric_ssim(a, b));
  }
}

TEST(Metrics, SsimClosedFormsAndSymmetry) {
  Rng rng(4);
  const Tensor x = random_tensor({2, 3, 12, 12}, rng, 0, 1);
  EXPECT_NEAR(metric_ssim(x, x), 1.0, 1e-9);
  EXPECT_NEAR(metric_ssim(Tensor::filled({1, 12, 12}, 0.5), Tensor::filled({1, 12, 12}, 0.5)), 1.0, 1e-12);
  // Constant images: only the luminance term differs from 1.
  const double expected = (2 * 0.5 * 0.6 + 1e-4) / (0.25 + 0.36 + 1e-4);
  EXPECT_NEAR(metric_ssim(Tensor::filled({1, 12, 12}, 0.5), Tensor::filled({1, 12, 12}, 0.6)), expected,
              1e-12);
  std::vector<Real> inv(x.numel());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1 - x.data()[i];
  const Tensor y = Tensor::from(x.shape(), inv);
  EXPECT_LT(metric_ssim(x, y), 1.0);
  EXPECT_DOUBLE_EQ(metric_ssim(x, y), metric_ssim(y, x));
  EXPECT_THROW(metric_ssim(Tensor::zeros({3, 10, 12}), Tensor::zeros({3, 10, 12})), std::invalid_argument);
  EXPECT_THROW(metric_ssim(Tensor::zeros({2, 12, 12}), Tensor::zeros({2, 12, 12})), DimensionError);
}

TEST(Metrics, SsimAveragesOverBatch) {
  Rng rng(5);
  const Tensor a = random_tensor({2, 3, 12, 12}, rng, 0, 1), b = random_tensor({2, 3, 12, 12}, rng, 0, 1);
  auto item = [](const Tensor& t, std::size_t n) {
    const std::size_t s = 3 * 12 * 12;
    return Tensor::from({3, 12, 12}, std::vector<Real>(t.data().begin() + n * s, t.data().begin() + (n + 1) * s));
  };
  EXPECT_NEAR(metric_ssim(a, b), (metric_ssim(item(a, 0), item(b, 0)) + metric_ssim(item(a, 1), item(b, 1))) / 2,
              1e-14);
}

}  // namespace
}  // namespace ltnn
