#pragma once

#include "ltnn/tensor.hpp"

namespace ltnn {

/// Mean absolute difference over every element. Throws DimensionError on a
/// shape mismatch.
double metric_l1(const Tensor& prediction, const Tensor& target);

/// Mean absolute difference over the pixels where `mask` is one, counting
/// every channel. `mask` has the shape of `prediction` with the channel axis
/// (third from last) reduced to 1. Throws std::invalid_argument for an
/// all-zero or non-binary mask.
double metric_l1_masked(const Tensor& prediction, const Tensor& target, const Tensor& mask);

/// Mean local SSIM on luminance (0.299 R + 0.587 G + 0.114 B; single-channel
/// input is used as is) with an 11x11 Gaussian window, sigma 1.5, K1 0.01,
/// K2 0.03 and dynamic range 1. Only windows that fit inside the image are
/// used. Accepts C x H x W or N x C x H x W (averaged over N). Throws
/// std::invalid_argument when the image is smaller than the window.
double metric_ssim(const Tensor& prediction, const Tensor& target);

inline constexpr int kSsimWindow = 11;

}  // namespace ltnn
