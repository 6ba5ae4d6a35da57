#include "ltnn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ltnn/errors.hpp"

namespace ltnn {

namespace {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

bool needs_record(std::initializer_list<const Tensor*> inputs) {
  if (!active_tape()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

Tensor finish(Tensor out, std::vector<Tensor> inputs, Tape::BackwardFn fn) {
  out.set_requires_grad(true);
  active_tape()->record(std::move(inputs), out, std::move(fn));
  return out;
}

void require_image(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() != 4) {
    throw DimensionError(std::string(what) + " must be N x C x H x W, got " +
                         (t.defined() ? to_string(t.shape()) : "<undefined>"));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels, height, width;  // the "image" side of the correlation
  std::size_t kh, kw;
  std::size_t out_h, out_w;             // the correlation grid
  int stride, padding;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t grid() const { return out_h * out_w; }
};

// Unrolls receptive fields: col is patch() x grid(), row-major.
void im2col(const Real* image, const ConvGeometry& g, Real* col) {
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const auto p = static_cast<std::ptrdiff_t>(g.padding);
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const Real* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
        Real* dst = col + row * g.grid();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(ki);
          if (y < 0 || y >= H) {
            std::fill_n(dst + oy * g.out_w, g.out_w, Real(0));
            continue;
          }
          const Real* src = plane + y * W;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x =
                static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(kj);
            dst[oy * g.out_w + ox] = (x < 0 || x >= W) ? Real(0) : src[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters col back into image (accumulating).
void col2im(const Real* col, const ConvGeometry& g, Real* image) {
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const auto p = static_cast<std::ptrdiff_t>(g.padding);
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    Real* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++row) {
        const Real* src = col + row * g.grid();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(ki);
          if (y < 0 || y >= H) continue;
          Real* dst = plane + y * W;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x =
                static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(kj);
            if (x >= 0 && x < W) dst[x] += src[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

// `in_axis` is the weight axis that must match the input's channel count and
// `out_axis` the one that matches the bias.
void check_conv_args(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                     int padding, std::size_t in_axis, std::size_t out_axis, const char* op) {
  require_image(input, op);
  if (!weight.defined() || weight.rank() != 4) {
    throw DimensionError(std::string(op) + ": weight must be rank 4, got " +
                         (weight.defined() ? to_string(weight.shape()) : "<undefined>"));
  }
  if (stride < 1) throw std::invalid_argument(std::string(op) + ": stride must be positive");
  if (padding < 0) throw std::invalid_argument(std::string(op) + ": padding must be >= 0");
  if (input.dim(1) != weight.dim(in_axis)) {
    throw DimensionError(std::string(op) + ": input " + to_string(input.shape()) + " has " +
                         std::to_string(input.dim(1)) + " channels but weight " +
                         to_string(weight.shape()) + " expects " +
                         std::to_string(weight.dim(in_axis)));
  }
  if (bias.defined() && bias.numel() != weight.dim(out_axis)) {
    throw DimensionError(std::string(op) + ": bias " + to_string(bias.shape()) +
                         " does not match output channels of weight " + to_string(weight.shape()));
  }
}

void add_bias(std::span<Real> out, const Tensor& bias, std::size_t batch, std::size_t channels,
              std::size_t plane) {
  if (!bias.defined()) return;
  const auto b = bias.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      Real* dst = out.data() + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += b[c];
    }
  }
}

void bias_backward(const Tensor& bias, std::span<const Real> g, std::size_t batch,
                   std::size_t channels, std::size_t plane) {
  std::vector<Real> db(channels, Real(0));
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const Real* src = g.data() + (n * channels + c) * plane;
      Real acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += src[i];
      db[c] += acc;
    }
  }
  accumulate_grad(bias, db);
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  Tensor result = make_result(x.shape(), std::move(out));
  if (!needs_record({&x})) return result;
  return finish(result, {x}, [x, df](std::span<const Real> g) {
    const auto in = x.data();
    std::vector<Real> dx(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) dx[i] = g[i] * df(in[i]);
    accumulate_grad(x, dx);
  });
}

Real stable_sigmoid(Real v) {
  Real s;
  if (v >= 0) {
    s = Real(1) / (Real(1) + std::exp(-v));
  } else {
    const Real e = std::exp(v);
    s = e / (Real(1) + e);
  }
  if (s >= Real(1)) s = std::nextafter(Real(1), Real(0));
  if (s <= Real(0)) s = std::numeric_limits<Real>::denorm_min();
  return s;
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= n) return n - 1;
  return static_cast<std::size_t>(i);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  check_conv_args(input, weight, bias, stride, padding, 1, 0, "conv2d");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t F = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (kh > H + 2 * static_cast<std::size_t>(padding) ||
      kw > W + 2 * static_cast<std::size_t>(padding)) {
    throw DimensionError("conv2d: kernel " + to_string(weight.shape()) +
                         " larger than padded input " + to_string(input.shape()));
  }
  ConvGeometry g{C, H, W, kh, kw, 0, 0, stride, padding};
  g.out_h = (H + 2 * padding - kh) / stride + 1;
  g.out_w = (W + 2 * padding - kw) / stride + 1;

  const bool record = needs_record({&input, &weight, &bias});
  auto cols = std::make_shared<std::vector<std::vector<Real>>>(record ? N : 0);
  std::vector<Real> out(N * F * g.grid());
  std::vector<Real> scratch(record ? 0 : g.patch() * g.grid());
  ConstMatrixMap wmat(weight.data().data(), F, g.patch());
  for (std::size_t n = 0; n < N; ++n) {
    Real* col = scratch.data();
    if (record) {
      (*cols)[n].resize(g.patch() * g.grid());
      col = (*cols)[n].data();
    }
    im2col(input.data().data() + n * C * H * W, g, col);
    MatrixMap omat(out.data() + n * F * g.grid(), F, g.grid());
    omat.noalias() = wmat * ConstMatrixMap(col, g.patch(), g.grid());
  }
  add_bias(out, bias, N, F, g.grid());
  Tensor result = make_result({N, F, g.out_h, g.out_w}, std::move(out));
  if (!record) return result;

  return finish(result, {input, weight, bias}, [input, weight, bias, g, cols, N, F](
                                                   std::span<const Real> grad) {
    const std::size_t in_plane = g.channels * g.height * g.width;
    ConstMatrixMap wmat(weight.data().data(), F, g.patch());
    if (weight.requires_grad()) {
      RowMatrix dw = RowMatrix::Zero(F, g.patch());
      for (std::size_t n = 0; n < N; ++n) {
        ConstMatrixMap gmat(grad.data() + n * F * g.grid(), F, g.grid());
        dw.noalias() += gmat * ConstMatrixMap((*cols)[n].data(), g.patch(), g.grid()).transpose();
      }
      accumulate_grad(weight, std::span<const Real>(dw.data(), dw.size()));
    }
    if (bias.defined() && bias.requires_grad()) bias_backward(bias, grad, N, F, g.grid());
    if (input.requires_grad()) {
      std::vector<Real> dx(N * in_plane, Real(0));
      RowMatrix dcol(g.patch(), g.grid());
      for (std::size_t n = 0; n < N; ++n) {
        ConstMatrixMap gmat(grad.data() + n * F * g.grid(), F, g.grid());
        dcol.noalias() = wmat.transpose() * gmat;
        col2im(dcol.data(), g, dx.data() + n * in_plane);
      }
      accumulate_grad(input, dx);
    }
  });
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride, int padding) {
  check_conv_args(input, weight, bias, stride, padding, 0, 1, "conv2d_transpose");
  const std::size_t N = input.dim(0), Cin = input.dim(1), Hi = input.dim(2), Wi = input.dim(3);
  const std::size_t F = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  const auto full_h = static_cast<std::ptrdiff_t>((Hi - 1) * stride + kh) - 2 * padding;
  const auto full_w = static_cast<std::ptrdiff_t>((Wi - 1) * stride + kw) - 2 * padding;
  if (full_h < 1 || full_w < 1) {
    throw DimensionError("conv2d_transpose: padding " + std::to_string(padding) +
                         " leaves no output for input " + to_string(input.shape()) +
                         " and weight " + to_string(weight.shape()));
  }
  // Geometry of the forward correlation this op is the adjoint of:
  // image = output (F x Ho x Wo), grid = input (Hi x Wi).
  ConvGeometry g{F, static_cast<std::size_t>(full_h), static_cast<std::size_t>(full_w),
                 kh, kw, Hi, Wi, stride, padding};
  const std::size_t out_plane = F * g.height * g.width;

  std::vector<Real> out(N * out_plane, Real(0));
  ConstMatrixMap wmat(weight.data().data(), Cin, g.patch());
  RowMatrix col(g.patch(), g.grid());
  for (std::size_t n = 0; n < N; ++n) {
    ConstMatrixMap xmat(input.data().data() + n * Cin * g.grid(), Cin, g.grid());
    col.noalias() = wmat.transpose() * xmat;
    col2im(col.data(), g, out.data() + n * out_plane);
  }
  add_bias(out, bias, N, F, g.height * g.width);
  Tensor result = make_result({N, F, g.height, g.width}, std::move(out));
  if (!needs_record({&input, &weight, &bias})) return result;

  return finish(result, {input, weight, bias}, [input, weight, bias, g, N, Cin, F](
                                                   std::span<const Real> grad) {
    const std::size_t out_plane = F * g.height * g.width;
    ConstMatrixMap wmat(weight.data().data(), Cin, g.patch());
    RowMatrix dcol(g.patch(), g.grid());
    RowMatrix dw = RowMatrix::Zero(Cin, g.patch());
    std::vector<Real> dx(input.requires_grad() ? N * Cin * g.grid() : 0);
    for (std::size_t n = 0; n < N; ++n) {
      im2col(grad.data() + n * out_plane, g, dcol.data());
      if (weight.requires_grad()) {
        ConstMatrixMap xmat(input.data().data() + n * Cin * g.grid(), Cin, g.grid());
        dw.noalias() += xmat * dcol.transpose();
      }
      if (input.requires_grad()) {
        MatrixMap dxmat(dx.data() + n * Cin * g.grid(), Cin, g.grid());
        dxmat.noalias() = wmat * dcol;
      }
    }
    if (weight.requires_grad()) accumulate_grad(weight, std::span<const Real>(dw.data(), dw.size()));
    if (bias.defined() && bias.requires_grad()) {
      bias_backward(bias, grad, N, F, g.height * g.width);
    }
    if (input.requires_grad()) accumulate_grad(input, dx);
  });
}

namespace {

struct Tap {
  std::size_t lo, hi;
  Real w_hi;  // weight of `hi`; `lo` gets 1 - w_hi
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t factor) {
  std::vector<Tap> taps(in * factor);
  for (std::size_t d = 0; d < taps.size(); ++d) {
    Real src = (static_cast<Real>(d) + Real(0.5)) / static_cast<Real>(factor) - Real(0.5);
    if (src < 0) src = 0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[d] = Tap{lo, hi, src - static_cast<Real>(lo)};
  }
  return taps;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& input, int factor) {
  require_image(input, "bilinear_upsample input");
  if (factor < 1) throw std::invalid_argument("bilinear_upsample: factor must be >= 1");
  if (factor == 1) {
    Tensor out = make_result(input.shape(), std::vector<Real>(input.data().begin(), input.data().end()));
    if (!needs_record({&input})) return out;
    return finish(out, {input}, [input](std::span<const Real> g) { accumulate_grad(input, g); });
  }
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t f = static_cast<std::size_t>(factor);
  const std::size_t Ho = H * f, Wo = W * f;
  const auto ty = bilinear_taps(H, f);
  const auto tx = bilinear_taps(W, f);
  const auto in = input.data();
  std::vector<Real> out(N * C * Ho * Wo);
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    const Real* src = in.data() + plane * H * W;
    Real* dst = out.data() + plane * Ho * Wo;
    for (std::size_t y = 0; y < Ho; ++y) {
      const Real* r0 = src + ty[y].lo * W;
      const Real* r1 = src + ty[y].hi * W;
      const Real wy = ty[y].w_hi;
      for (std::size_t x = 0; x < Wo; ++x) {
        const Real wx = tx[x].w_hi;
        const Real top = r0[tx[x].lo] * (1 - wx) + r0[tx[x].hi] * wx;
        const Real bottom = r1[tx[x].lo] * (1 - wx) + r1[tx[x].hi] * wx;
        dst[y * Wo + x] = top * (1 - wy) + bottom * wy;
      }
    }
  }
  Tensor result = make_result({N, C, Ho, Wo}, std::move(out));
  if (!needs_record({&input})) return result;
  return finish(result, {input}, [input, ty, tx, N, C, H, W, Ho, Wo](std::span<const Real> g) {
    std::vector<Real> dx(N * C * H * W, Real(0));
    for (std::size_t plane = 0; plane < N * C; ++plane) {
      const Real* src = g.data() + plane * Ho * Wo;
      Real* dst = dx.data() + plane * H * W;
      for (std::size_t y = 0; y < Ho; ++y) {
        Real* r0 = dst + ty[y].lo * W;
        Real* r1 = dst + ty[y].hi * W;
        const Real wy = ty[y].w_hi;
        for (std::size_t x = 0; x < Wo; ++x) {
          const Real wx = tx[x].w_hi;
          const Real v = src[y * Wo + x];
          r0[tx[x].lo] += v * (1 - wy) * (1 - wx);
          r0[tx[x].hi] += v * (1 - wy) * wx;
          r1[tx[x].lo] += v * wy * (1 - wx);
          r1[tx[x].hi] += v * wy * wx;
        }
      }
    }
    accumulate_grad(input, dx);
  });
}

Tensor swish(const Tensor& x, const Tensor& beta) {
  if (!beta.defined() || beta.numel() != 1) {
    throw DimensionError("swish: beta must hold a single value");
  }
  const Real b = beta.item();
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * stable_sigmoid(b * in[i]);
  Tensor result = make_result(x.shape(), std::move(out));
  if (!needs_record({&x, &beta})) return result;
  return finish(result, {x, beta}, [x, beta](std::span<const Real> g) {
    const Real b = beta.item();
    const auto in = x.data();
    std::vector<Real> dx(x.requires_grad() ? in.size() : 0);
    Real dbeta = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Real v = in[i];
      const Real s = stable_sigmoid(b * v);
      const Real ds = s * (1 - s);
      if (!dx.empty()) dx[i] = g[i] * (s + b * v * ds);
      dbeta += g[i] * v * v * ds;
    }
    if (x.requires_grad()) accumulate_grad(x, dx);
    if (beta.requires_grad()) accumulate_grad(beta, std::span<const Real>(&dbeta, 1));
  });
}

Tensor sigmoid(const Tensor& x) {
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = stable_sigmoid(in[i]);
  Tensor result = make_result(x.shape(), std::move(out));
  if (!needs_record({&x})) return result;
  return finish(result, {x}, [x, result](std::span<const Real> g) {
    const auto s = result.data();
    std::vector<Real> dx(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) dx[i] = g[i] * s[i] * (1 - s[i]);
    accumulate_grad(x, dx);
  });
}

Tensor shift(const Tensor& x, int di, int dj) {
  if (di < -1 || di > 1 || dj < -1 || dj > 1) {
    throw std::invalid_argument("shift: offsets must lie in {-1, 0, 1}, got (" +
                                std::to_string(di) + ", " + std::to_string(dj) + ")");
  }
  require_image(x, "shift input");
  const std::size_t planes = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  std::vector<std::size_t> rows(H), cols(W);
  for (std::size_t r = 0; r < H; ++r) rows[r] = clamp_index(static_cast<std::ptrdiff_t>(r) - di, H);
  for (std::size_t c = 0; c < W; ++c) cols[c] = clamp_index(static_cast<std::ptrdiff_t>(c) - dj, W);
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const Real* src = in.data() + p * H * W;
    Real* dst = out.data() + p * H * W;
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) dst[r * W + c] = src[rows[r] * W + cols[c]];
    }
  }
  Tensor result = make_result(x.shape(), std::move(out));
  if (!needs_record({&x})) return result;
  return finish(result, {x}, [x, rows, cols, planes, H, W](std::span<const Real> g) {
    std::vector<Real> dx(planes * H * W, Real(0));
    for (std::size_t p = 0; p < planes; ++p) {
      const Real* src = g.data() + p * H * W;
      Real* dst = dx.data() + p * H * W;
      for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) dst[rows[r] * W + cols[c]] += src[r * W + c];
      }
    }
    accumulate_grad(x, dx);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (!needs_record({&a, &b})) return result;
  return finish(result, {a, b}, [a, b](std::span<const Real> g) {
    if (a.requires_grad()) accumulate_grad(a, g);
    if (b.requires_grad()) accumulate_grad(b, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (!needs_record({&a, &b})) return result;
  return finish(result, {a, b}, [a, b](std::span<const Real> g) {
    if (a.requires_grad()) accumulate_grad(a, g);
    if (b.requires_grad()) {
      std::vector<Real> neg(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
      accumulate_grad(b, neg);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data(), y = b.data();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (!needs_record({&a, &b})) return result;
  return finish(result, {a, b}, [a, b](std::span<const Real> g) {
    const auto x = a.data(), y = b.data();
    std::vector<Real> d(g.size());
    if (a.requires_grad()) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * y[i];
      accumulate_grad(a, d);
    }
    if (b.requires_grad()) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * x[i];
      accumulate_grad(b, d);
    }
  });
}

Tensor affine(const Tensor& x, Real a, Real b) {
  return unary(x, [a, b](Real v) { return a * v + b; }, [a](Real) { return a; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](Real v) { return std::abs(v); },
      [](Real v) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); });
}

Tensor square(const Tensor& x) {
  return unary(x, [](Real v) { return v * v; }, [](Real v) { return 2 * v; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](Real v) { return std::log(v); }, [](Real v) { return Real(1) / v; });
}

Tensor clamp(const Tensor& x, Real lo, Real hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  return unary(
      x, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
      [lo, hi](Real v) { return (v > lo && v < hi) ? Real(1) : Real(0); });
}

Tensor sum(const Tensor& x) {
  Real acc = 0;
  for (Real v : x.data()) acc += v;
  Tensor result = make_result(Shape{}, {acc});
  if (!needs_record({&x})) return result;
  return finish(result, {x}, [x](std::span<const Real> g) {
    accumulate_grad(x, std::vector<Real>(x.numel(), g[0]));
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_image(x, "global_avg_pool input");
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  const auto in = x.data();
  std::vector<Real> out(N * C);
  for (std::size_t p = 0; p < N * C; ++p) {
    Real acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += in[p * plane + i];
    out[p] = acc / static_cast<Real>(plane);
  }
  Tensor result = make_result({N, C, 1, 1}, std::move(out));
  if (!needs_record({&x})) return result;
  return finish(result, {x}, [x, N, C, plane](std::span<const Real> g) {
    std::vector<Real> dx(N * C * plane);
    for (std::size_t p = 0; p < N * C; ++p) {
      const Real v = g[p] / static_cast<Real>(plane);
      std::fill_n(dx.data() + p * plane, plane, v);
    }
    accumulate_grad(x, dx);
  });
}

Tensor channel_scale(const Tensor& x, const Tensor& scale) {
  require_image(x, "channel_scale input");
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (!scale.defined() || scale.numel() != C) {
    throw DimensionError("channel_scale: scale " +
                         (scale.defined() ? to_string(scale.shape()) : std::string("<undefined>")) +
                         " does not match channels of " + to_string(x.shape()));
  }
  const auto in = x.data();
  const auto s = scale.data();
  std::vector<Real> out(in.size());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[base + i] = s[c] * in[base + i];
    }
  }
  Tensor result = make_result(x.shape(), std::move(out));
  if (!needs_record({&x, &scale})) return result;
  return finish(result, {x, scale}, [x, scale, N, C, plane](std::span<const Real> g) {
    const auto in = x.data();
    const auto s = scale.data();
    std::vector<Real> dx(x.requires_grad() ? in.size() : 0);
    std::vector<Real> ds(C, Real(0));
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t base = (n * C + c) * plane;
        Real acc = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          acc += g[base + i] * in[base + i];
          if (!dx.empty()) dx[base + i] = g[base + i] * s[c];
        }
        ds[c] += acc;
      }
    }
    if (x.requires_grad()) accumulate_grad(x, dx);
    if (scale.requires_grad()) accumulate_grad(scale, ds);
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_image(a, "concat_channels lhs");
  require_image(b, "concat_channels rhs");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw DimensionError("concat_channels: incompatible shapes " + to_string(a.shape()) +
                         " and " + to_string(b.shape()));
  }
  const std::size_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  std::vector<Real> out(N * (Ca + Cb) * plane);
  const auto x = a.data(), y = b.data();
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(x.data() + n * Ca * plane, Ca * plane, out.data() + n * (Ca + Cb) * plane);
    std::copy_n(y.data() + n * Cb * plane, Cb * plane,
                out.data() + (n * (Ca + Cb) + Ca) * plane);
  }
  Tensor result = make_result({N, Ca + Cb, a.dim(2), a.dim(3)}, std::move(out));
  if (!needs_record({&a, &b})) return result;
  return finish(result, {a, b}, [a, b, N, Ca, Cb, plane](std::span<const Real> g) {
    if (a.requires_grad()) {
      std::vector<Real> da(N * Ca * plane);
      for (std::size_t n = 0; n < N; ++n) {
        std::copy_n(g.data() + n * (Ca + Cb) * plane, Ca * plane, da.data() + n * Ca * plane);
      }
      accumulate_grad(a, da);
    }
    if (b.requires_grad()) {
      std::vector<Real> db(N * Cb * plane);
      for (std::size_t n = 0; n < N; ++n) {
        std::copy_n(g.data() + (n * (Ca + Cb) + Ca) * plane, Cb * plane,
                    db.data() + n * Cb * plane);
      }
      accumulate_grad(b, db);
    }
  });
}

}  // namespace ltnn
