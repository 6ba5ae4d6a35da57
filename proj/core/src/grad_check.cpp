#include "ltnn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ltnn {

Real relative_error(Real autodiff, Real numeric, Real floor) {
  const Real denom = std::max({std::abs(autodiff), std::abs(numeric), floor});
  return std::abs(autodiff - numeric) / denom;
}

GradCheckReport grad_check(const LossFn& loss, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  std::vector<bool> saved_flags;
  for (auto& t : inputs) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.clear_grad();
  }

  std::vector<std::vector<Real>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor value = loss(inputs);
    tape.backward(value);
    for (auto& t : inputs) {
      if (t.has_grad()) {
        analytic.emplace_back(t.grad().begin(), t.grad().end());
      } else {
        analytic.emplace_back(t.numel(), Real(0));
      }
      t.clear_grad();
    }
  }

  GradCheckReport report;
  NoGradScope no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const Real original = values[e];
      values[e] = original + options.step;
      const Real plus = loss(inputs).item();
      values[e] = original - options.step;
      const Real minus = loss(inputs).item();
      values[e] = original;
      const Real numeric = (plus - minus) / (2 * options.step);
      const Real err = relative_error(analytic[i][e], numeric, options.floor);
      if (err > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = err;
        report.worst_input = i;
        report.worst_element = e;
        report.autodiff = analytic[i][e];
        report.numeric = numeric;
      }
      ++report.checked;
    }
  }
  report.passed = report.max_rel_error < options.tolerance;

  for (std::size_t i = 0; i < inputs.size(); ++i) inputs[i].set_requires_grad(saved_flags[i]);
  return report;
}

}  // namespace ltnn
