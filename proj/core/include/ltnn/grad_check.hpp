#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ltnn/tensor.hpp"

namespace ltnn {

struct GradCheckOptions {
  Real step = Real(1e-5);
  Real tolerance = Real(1e-4);
  /// Denominator floor: errors on entries whose gradient magnitude is below
  /// this are measured relative to the floor.
  Real floor = Real(1e-3);
};

struct GradCheckReport {
  Real max_rel_error = 0;
  std::size_t worst_input = 0;    // index into the inputs vector
  std::size_t worst_element = 0;  // flat index within that input
  Real autodiff = 0;
  Real numeric = 0;
  std::size_t checked = 0;
  bool passed = false;
};

using LossFn = std::function<Tensor(std::span<const Tensor>)>;

/// Compares reverse-mode gradients of a scalar loss against central finite
/// differences over every element of every input. Inputs are treated as
/// leaves: their requires_grad flag is set for the duration of the check and
/// their values are restored afterwards.
GradCheckReport grad_check(const LossFn& loss, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

/// |a - n| / max(|a|, |n|, floor)
Real relative_error(Real autodiff, Real numeric, Real floor);

}  // namespace ltnn
