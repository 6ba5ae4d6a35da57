#include "ltnn/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "ltnn/errors.hpp"

namespace ltnn {

namespace {

thread_local Tape* g_active_tape = nullptr;

bool default_finite_checks() {
  if (const char* env = std::getenv("LTNN_CHECK_FINITE")) {
    return std::string(env) == "1";
  }
#ifdef NDEBUG
  return false;
#else
  return true;
#endif
}

bool g_finite_checks = default_finite_checks();

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), Real(0)); }

Tensor Tensor::filled(Shape shape, Real value) {
  const auto n = ltnn::numel(shape);
  return from(std::move(shape), std::vector<Real>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values) {
  if (ltnn::numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + ltnn::to_string(shape) + " holds " +
                         std::to_string(ltnn::numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(Real value) { return from(Shape{}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         ltnn::to_string(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const Real> Tensor::data() const { return impl_->data; }
std::span<Real> Tensor::mutable_data() { return impl_->data; }

Real Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + ltnn::to_string(shape()));
  }
  return impl_->data[0];
}

Real Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) {
    throw DimensionError("index rank does not match shape " + ltnn::to_string(s));
  }
  std::size_t offset = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw std::out_of_range("tensor index out of range");
    offset = offset * s[axis] + i;
    ++axis;
  }
  return impl_->data[offset];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const Real> Tensor::grad() const { return impl_->grad; }
std::span<Real> Tensor::mutable_grad() { return impl_->grad; }
void Tensor::clear_grad() {
  impl_->grad.clear();
  impl_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const { return from(impl_->shape, impl_->data); }

Tensor make_result(Shape shape, std::vector<Real> values) {
  if (g_finite_checks) {
    for (Real v : values) {
      if (!std::isfinite(v)) {
        throw std::domain_error("non-finite value produced by op with output shape " +
                                to_string(shape));
      }
    }
  }
  return Tensor::from(std::move(shape), std::move(values));
}

std::span<Real> grad_buffer(const Tensor& t) {
  auto& impl = t.impl();
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), Real(0));
  return impl.grad;
}

void accumulate_grad(const Tensor& t, std::span<const Real> delta) {
  auto g = grad_buffer(t);
  if (g.size() != delta.size()) {
    throw DimensionError("gradient of size " + std::to_string(delta.size()) +
                         " does not match tensor " + to_string(t.shape()));
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

void Tape::record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn) {
  entries_.push_back(Entry{std::move(inputs), output, std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got shape " +
                                (loss.defined() ? to_string(loss.shape()) : "<undefined>"));
  }
  // Stale gradients on intermediate nodes from an earlier pass would re-trigger
  // their entries; leaves keep accumulating.
  for (auto& e : entries_) e.output.clear_grad();
  const Real one = 1;
  accumulate_grad(loss, std::span<const Real>(&one, 1));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->fn(it->output.grad());
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() noexcept { return g_active_tape; }

void backward(const Tensor& loss) {
  if (!g_active_tape) throw std::logic_error("backward() called without an active tape");
  g_active_tape->backward(loss);
}

void set_finite_checks(bool on) noexcept { g_finite_checks = on; }
bool finite_checks() noexcept { return g_finite_checks; }

}  // namespace ltnn
