#include <gtest/gtest.h>

#include "ltnn/grad_check.hpp"
#include "ltnn/losses.hpp"
#include "ltnn/ops.hpp"
#include "test_support.hpp"

namespace ltnn {
namespace {

using testing::random_tensor;

// Weighted sum with fixed random coefficients so every output element
// contributes a distinct gradient.
Tensor probe(const Tensor& y, std::uint64_t seed = 77) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

void expect_passes(const LossFn& loss, std::vector<Tensor> inputs, const char* what) {
  const GradCheckReport r = grad_check(loss, std::move(inputs));
  EXPECT_TRUE(r.passed) << what << ": max rel err " << r.max_rel_error << " at input "
                        << r.worst_input << " element " << r.worst_element << " (autodiff "
                        << r.autodiff << ", numeric " << r.numeric << ")";
  EXPECT_GT(r.checked, 0u) << what;
}

TEST(GradCheck, LinearGraphIsExactToRounding) {
  Rng rng(1);
  const GradCheckReport r = grad_check(
      [](std::span<const Tensor> in) { return sum(affine(in[0], 3, 1)); }, {random_tensor({5}, rng)});
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(GradCheck, Conv2d) {
  Rng rng(2);
  for (int stride : {1, 2}) {
    expect_passes([stride](std::span<const Tensor> in) { return probe(conv2d(in[0], in[1], in[2], stride, 1)); },
                  {random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
                  "conv2d");
  }
}

TEST(GradCheck, Conv2dTranspose) {
  Rng rng(3);
  expect_passes([](std::span<const Tensor> in) { return probe(conv2d_transpose(in[0], in[1], in[2], 2, 1)); },
                {random_tensor({2, 2, 3, 3}, rng), random_tensor({2, 3, 4, 4}, rng), random_tensor({3}, rng)},
                "conv2d_transpose");
}

TEST(GradCheck, BilinearUpsample) {
  Rng rng(4);
  for (int f : {1, 2, 3}) {
    expect_passes([f](std::span<const Tensor> in) { return probe(bilinear_upsample(in[0], f)); },
                  {random_tensor({1, 2, 3, 4}, rng)}, "bilinear_upsample");
  }
}

TEST(GradCheck, SwishWithTrainableBeta) {
  Rng rng(5);
  expect_passes([](std::span<const Tensor> in) { return probe(swish(in[0], in[1])); },
                {random_tensor({2, 3, 2, 2}, rng), Tensor::scalar(0.8)}, "swish");
}

TEST(GradCheck, ElementwiseOps) {
  Rng rng(6);
  const Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
  expect_passes([](std::span<const Tensor> in) { return probe(sigmoid(in[0])); }, {a}, "sigmoid");
  expect_passes([](std::span<const Tensor> in) { return probe(add(in[0], in[1])); }, {a, b}, "add");
  expect_passes([](std::span<const Tensor> in) { return probe(sub(in[0], in[1])); }, {a, b}, "sub");
  expect_passes([](std::span<const Tensor> in) { return probe(mul(in[0], in[1])); }, {a, b}, "mul");
  expect_passes([](std::span<const Tensor> in) { return probe(affine(in[0], -2.5, 0.3)); }, {a}, "affine");
  expect_passes([](std::span<const Tensor> in) { return probe(square(in[0])); }, {a}, "square");
  // Kinks are kept away from the probe points.
  expect_passes([](std::span<const Tensor> in) { return probe(abs(in[0])); },
                {Tensor::from({4}, {-0.7, -0.2, 0.3, 0.9})}, "abs");
  expect_passes([](std::span<const Tensor> in) { return probe(log(in[0])); },
                {random_tensor({2, 3}, rng, 0.2, 2.0)}, "log");
  expect_passes([](std::span<const Tensor> in) { return probe(clamp(in[0], -0.5, 0.5)); },
                {Tensor::from({4}, {-0.9, -0.3, 0.2, 0.8})}, "clamp");
}

TEST(GradCheck, StructuralOps) {
  Rng rng(7);
  const Tensor x = random_tensor({2, 2, 3, 3}, rng);
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      expect_passes([i, j](std::span<const Tensor> in) { return probe(shift(in[0], i, j)); }, {x}, "shift");
    }
  }
  expect_passes([](std::span<const Tensor> in) { return probe(global_avg_pool(in[0])); }, {x}, "pool");
  expect_passes([](std::span<const Tensor> in) { return probe(channel_scale(in[0], in[1])); },
                {x, random_tensor({2}, rng)}, "channel_scale");
  expect_passes([](std::span<const Tensor> in) { return probe(concat_channels(in[0], in[1])); },
                {x, random_tensor({2, 1, 3, 3}, rng)}, "concat_channels");
}

TEST(GradCheck, CompositeConvSwishSum) {
  Rng rng(8);
  expect_passes(
      [](std::span<const Tensor> in) {
        return sum(swish(conv2d(in[0], in[1], in[2], 1, 1), in[3]));
      },
      {random_tensor({1, 2, 4, 4}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng),
       Tensor::scalar(1.2)},
      "conv->swish->sum");
}

TEST(GradCheck, Losses) {
  Rng rng(9);
  const Tensor p = random_tensor({2, 1, 1, 1}, rng, 0.1, 0.9), q = random_tensor({2, 1, 1, 1}, rng, 0.1, 0.9);
  expect_passes([](std::span<const Tensor> in) { return loss_adv_d(in[0], in[1]); }, {p, q}, "adv_d");
  expect_passes([](std::span<const Tensor> in) { return loss_adv_g(in[0]); }, {p}, "adv_g");
  const Tensor y = random_tensor({2, 3, 4, 4}, rng), t = random_tensor({2, 3, 4, 4}, rng);
  expect_passes([](std::span<const Tensor> in) { return loss_recon(in[0], in[1]); }, {y, t}, "recon");
  expect_passes([](std::span<const Tensor> in) { return loss_smooth(in[0]); }, {y}, "smooth");
  expect_passes([](std::span<const Tensor> in) { return loss_consist(in[0], in[1]); }, {y, t}, "consist");
}

// square() with a backward rule that is wrong for element 3 only.
Tensor corrupted_square(const Tensor& x) {
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * x.data()[i];
  Tensor result = make_result(x.shape(), std::move(out));
  if (active_tape() && x.requires_grad()) {
    result.set_requires_grad(true);
    active_tape()->record({x}, result, [x](std::span<const Real> g) {
      std::vector<Real> d(g.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = (i == 3 ? 3 : 2) * x.data()[i] * g[i];
      accumulate_grad(x, d);
    });
  }
  return result;
}

TEST(GradCheck, CorruptedBackwardIsLocated) {
  const GradCheckReport r = grad_check(
      [](std::span<const Tensor> in) { return sum(add(square(in[0]), corrupted_square(in[1]))); },
      {Tensor::from({5}, {0.1, 0.2, 0.3, 0.4, 0.5}), Tensor::from({5}, {0.5, 0.6, 0.7, 0.8, 0.9})});
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_input, 1u);
  EXPECT_EQ(r.worst_element, 3u);
  EXPECT_NEAR(r.autodiff, 2.4, 1e-12);
  EXPECT_NEAR(r.numeric, 1.6, 1e-6);
}

TEST(GradCheck, RestoresInputsAndRequiresGrad) {
  Tensor x = Tensor::from({3}, {0.25, -0.5, 0.75});
  grad_check([](std::span<const Tensor> in) { return sum(square(in[0])); }, {x});
  EXPECT_FALSE(x.requires_grad());
  EXPECT_EQ(testing::values(x), (std::vector<Real>{0.25, -0.5, 0.75}));
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0, 1e-3), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-6, 0.0, 1e-3), 1e-3);
}

}  // namespace
}  // namespace ltnn
