#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ltnn {

#if defined(LTNN_FLOAT32)
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct TensorImpl;
}

/// Dense row-major array that doubles as a node of the autodiff graph.
///
/// Copies are cheap handles onto the same storage. Op outputs are never
/// written after the op returns; only leaves (parameters, inputs) are
/// mutated, and only by their owners.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, Real value);
  static Tensor from(Shape shape, std::vector<Real> values);
  static Tensor scalar(Real value);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const Real> data() const;
  /// Write access for leaf owners (optimizers, loaders). Never call on op outputs.
  std::span<Real> mutable_data();
  Real item() const;
  Real at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  /// True when a gradient buffer exists (i.e. backward reached this tensor).
  bool has_grad() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  /// Drops the gradient buffer; has_grad() is false afterwards.
  void clear_grad();

  /// Same values, cut from the graph.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const void* id() const noexcept { return impl_.get(); }

  detail::TensorImpl& impl() const { return *impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Tape;
  friend Tensor make_result(Shape shape, std::vector<Real> values);
};

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;
};
}  // namespace detail

/// Returns an output tensor owning `values`.
Tensor make_result(Shape shape, std::vector<Real> values);

/// Adds `delta` into the gradient buffer of `t`, allocating it on first use.
void accumulate_grad(const Tensor& t, std::span<const Real> delta);
/// Allocates (zeroed) and returns the gradient buffer of `t`.
std::span<Real> grad_buffer(const Tensor& t);

/// Ordered record of differentiable operations.
///
/// Ops append an entry when a tape is active and at least one input requires
/// a gradient. Entries are appended after their inputs exist, so the record
/// is topologically ordered; backward() walks it in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const Real> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn);

  /// Populates d(loss)/d(t) for every requires_grad tensor reachable from
  /// `loss`. Throws std::invalid_argument for a non-scalar loss.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  void clear() noexcept { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
};

/// Makes `tape` the thread's active tape for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording on this thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

/// Backward over the active tape.
void backward(const Tensor& loss);

/// Finite-value checking of op outputs. Defaults to on in debug builds or
/// when LTNN_CHECK_FINITE=1 is set in the environment.
void set_finite_checks(bool on) noexcept;
bool finite_checks() noexcept;

}  // namespace ltnn
