#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ltnn/dataset.hpp"
#include "ltnn/image.hpp"
#include "ltnn/model.hpp"

namespace ltnn {

/// Metrics of one (sample, condition) pair.
struct SampleMetrics {
  std::string group;  // "seen" or "unseen"
  std::uint32_t object_id = 0;
  int condition = 0;
  double l1 = 0;
  double l1_masked = 0;
  double ssim = 0;
};

struct Stat {
  double mean = 0;
  double std = 0;  // population standard deviation
  std::size_t count = 0;
};

struct MetricStats {
  Stat l1, l1_masked, ssim;
};

struct GroupReport {
  std::string group;
  std::vector<MetricStats> per_condition;
  MetricStats aggregate;
};

struct MetricReport {
  std::vector<SampleMetrics> samples;
  std::vector<GroupReport> groups;

  const GroupReport* find(std::string_view group) const;
  /// group,condition,metric,mean,std,count (condition "all" for aggregates)
  std::string summary_csv() const;
  /// group,object_id,condition,l1,l1_masked,ssim
  std::string samples_csv() const;
  std::string to_text() const;
};

/// Predicts y^_k for a batch; the result is clamped to [0, 1] before scoring.
using Predictor = std::function<Tensor(const Batch& batch, int k)>;

struct EvalOptions {
  std::size_t batch_size = 16;
  /// Samples shown in the (input, prediction, target) grid.
  std::size_t grid_samples = 4;
};

struct EvalResult {
  std::vector<SampleMetrics> samples;
  Image grid;
};

/// Scores every (sample, k) of `dataset`, in dataset order.
EvalResult evaluate(const Predictor& predictor, const Dataset& dataset, const std::string& group,
                    const EvalOptions& options = {});

/// Evaluates `model` without recording gradients. Throws DimensionError
/// describing both sides when the model does not fit the dataset.
EvalResult evaluate_model(const LtnnModel& model, const Dataset& dataset, const std::string& group,
                          const EvalOptions& options = {});

/// Groups samples (in first-seen group order) and computes per-condition and
/// aggregate statistics with fixed-order summation.
MetricReport summarize(std::vector<SampleMetrics> samples);

Stat compute_stat(const std::vector<double>& values);

}  // namespace ltnn
