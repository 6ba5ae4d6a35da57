#pragma once

#include "ltnn/tensor.hpp"

// Differentiable ops. Image tensors are N x C x H x W. Every op records a
// backward rule on the active tape when any input requires a gradient.
// There is no implicit broadcasting: apart from per-channel bias/scale,
// operands of elementwise ops must have identical shapes.

namespace ltnn {

/// Cross-correlation (no kernel flip) with zero padding.
/// `weight` is Cout x Cin x kh x kw; `bias` is Cout or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding);

/// Adjoint of conv2d with the same geometry: `weight` is Cin x Cout x kh x kw,
/// output spatial size is (H - 1) * stride - 2 * padding + k.
Tensor conv2d_transpose(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride, int padding);

/// Bilinear resampling by an integer factor with half-pixel centers
/// (source = (dst + 0.5) / factor - 0.5, clamped to the image).
Tensor bilinear_upsample(const Tensor& input, int factor);

/// x * sigmoid(beta * x) with a trainable scalar beta.
Tensor swish(const Tensor& x, const Tensor& beta);

/// Logistic function. Saturates to the representable values nearest 0 and 1
/// so the result always lies strictly inside (0, 1).
Tensor sigmoid(const Tensor& x);

/// out(r, c) = x(clamp(r - di), clamp(c - dj)) with di, dj in {-1, 0, 1}.
Tensor shift(const Tensor& x, int di, int dj);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// a * x + b elementwise with constants a, b.
Tensor affine(const Tensor& x, Real a, Real b);
inline Tensor scale(const Tensor& x, Real a) { return affine(x, a, Real(0)); }
/// |x|; the subgradient at 0 is 0.
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor log(const Tensor& x);
/// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, Real lo, Real hi);

/// Sum of all elements as a scalar.
Tensor sum(const Tensor& x);
/// N x C x H x W -> N x C x 1 x 1.
Tensor global_avg_pool(const Tensor& x);
/// Multiplies channel c of an N x C x H x W tensor by scale[c].
Tensor channel_scale(const Tensor& x, const Tensor& scale);
/// Concatenates along the channel axis; batch and spatial sizes must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace ltnn
