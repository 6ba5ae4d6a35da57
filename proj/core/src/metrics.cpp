#include "ltnn/metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "ltnn/errors.hpp"

namespace ltnn {

namespace {

void check_congruent(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes differ, " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double total = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

// Separable valid-mode Gaussian filter of an H x W plane.
std::vector<double> blur(const std::vector<double>& src, std::size_t h, std::size_t w) {
  static const auto g = gaussian_window();
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kSsimWindow; ++i) s += g[i] * src[y * w + x + i];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kSsimWindow; ++i) s += g[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

std::vector<double> luminance(std::span<const Real> image, std::size_t channels, std::size_t plane) {
  std::vector<double> out(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    out[p] = channels == 1 ? double(image[p])
                           : 0.299 * image[p] + 0.587 * image[plane + p] + 0.114 * image[2 * plane + p];
  }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t h,
                  std::size_t w) {
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = blur(a, h, w), mu_b = blur(b, h, w);
  const auto s_aa = blur(aa, h, w), s_bb = blur(bb, h, w), s_ab = blur(ab, h, w);
  double total = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = s_aa[i] - ma * ma, vb = s_bb[i] - mb * mb, cov = s_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

double metric_l1(const Tensor& prediction, const Tensor& target) {
  check_congruent(prediction, target, "metric_l1");
  const auto p = prediction.data(), t = target.data();
  if (p.empty()) throw std::invalid_argument("metric_l1: empty tensors");
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(double(p[i]) - double(t[i]));
  return total / static_cast<double>(p.size());
}

double metric_l1_masked(const Tensor& prediction, const Tensor& target, const Tensor& mask) {
  check_congruent(prediction, target, "metric_l1_masked");
  const Shape& shape = prediction.shape();
  if (shape.size() < 3) {
    throw DimensionError("metric_l1_masked: expected [N x] C x H x W, got " + to_string(shape));
  }
  Shape expected = shape;
  expected[shape.size() - 3] = 1;
  if (mask.shape() != expected) {
    throw DimensionError("metric_l1_masked: mask shape " + to_string(mask.shape()) +
                         " does not match " + to_string(expected));
  }
  const std::size_t channels = shape[shape.size() - 3];
  const std::size_t plane = shape[shape.size() - 2] * shape[shape.size() - 1];
  const std::size_t items = mask.numel() / plane;
  const auto p = prediction.data(), t = target.data(), m = mask.data();
  double total = 0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < items; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      const Real mv = m[n * plane + i];
      if (mv != Real(0) && mv != Real(1)) {
        throw std::invalid_argument("metric_l1_masked: mask must be binary");
      }
      if (mv == Real(0)) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t at = (n * channels + c) * plane + i;
        total += std::abs(double(p[at]) - double(t[at]));
      }
      count += channels;
    }
  }
  if (count == 0) throw std::invalid_argument("metric_l1_masked: mask selects no pixels");
  return total / static_cast<double>(count);
}

double metric_ssim(const Tensor& prediction, const Tensor& target) {
  check_congruent(prediction, target, "metric_ssim");
  const Shape& shape = prediction.shape();
  if (shape.size() != 3 && shape.size() != 4) {
    throw DimensionError("metric_ssim: expected [N x] C x H x W, got " + to_string(shape));
  }
  const std::size_t items = shape.size() == 4 ? shape[0] : 1;
  const std::size_t channels = shape[shape.size() - 3];
  const std::size_t h = shape[shape.size() - 2], w = shape[shape.size() - 1];
  if (channels != 1 && channels != 3) {
    throw DimensionError("metric_ssim: needs 1 or 3 channels, got " + std::to_string(channels));
  }
  if (h < kSsimWindow || w < kSsimWindow) {
    throw std::invalid_argument("metric_ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                                " is smaller than the 11x11 window");
  }
  const std::size_t plane = h * w, stride = channels * plane;
  double total = 0;
  for (std::size_t n = 0; n < items; ++n) {
    const auto a = luminance(prediction.data().subspan(n * stride, stride), channels, plane);
    const auto b = luminance(target.data().subspan(n * stride, stride), channels, plane);
    total += ssim_plane(a, b, h, w);
  }
  return total / static_cast<double>(items);
}

}  // namespace ltnn
