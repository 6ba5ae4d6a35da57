#include "ltnn/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "ltnn/config.hpp"
#include "ltnn/errors.hpp"
#include "ltnn/metrics.hpp"

namespace ltnn {

namespace {

Tensor slice_item(const Tensor& batch, std::size_t n) {
  Shape shape = batch.shape();
  const std::size_t stride = batch.numel() / shape[0];
  shape[0] = 1;
  const auto src = batch.data().subspan(n * stride, stride);
  return Tensor::from(shape, std::vector<Real>(src.begin(), src.end()));
}

Tensor clamp_unit(const Tensor& t) {
  std::vector<Real> v(t.data().begin(), t.data().end());
  for (auto& x : v) x = std::clamp(x, Real(0), Real(1));
  return Tensor::from(t.shape(), std::move(v));
}

void stat_csv(std::string& out, const std::string& group, const std::string& condition,
              const MetricStats& s) {
  const std::pair<const char*, const Stat*> rows[] = {
      {"l1", &s.l1}, {"l1_masked", &s.l1_masked}, {"ssim", &s.ssim}};
  for (const auto& [name, stat] : rows) {
    out += group + "," + condition + "," + name + "," + format_double(stat->mean) + "," +
           format_double(stat->std) + "," + std::to_string(stat->count) + "\n";
  }
}

MetricStats stats_of(const std::vector<const SampleMetrics*>& rows) {
  std::vector<double> l1, l1m, ssim;
  for (const auto* r : rows) {
    l1.push_back(r->l1);
    l1m.push_back(r->l1_masked);
    ssim.push_back(r->ssim);
  }
  return {compute_stat(l1), compute_stat(l1m), compute_stat(ssim)};
}

}  // namespace

Stat compute_stat(const std::vector<double>& values) {
  Stat s;
  s.count = values.size();
  if (values.empty()) return s;
  double total = 0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  double sq = 0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

const GroupReport* MetricReport::find(std::string_view group) const {
  for (const auto& g : groups) {
    if (g.group == group) return &g;
  }
  return nullptr;
}

std::string MetricReport::summary_csv() const {
  std::string out = "group,condition,metric,mean,std,count\n";
  for (const auto& g : groups) {
    for (std::size_t k = 0; k < g.per_condition.size(); ++k) {
      stat_csv(out, g.group, std::to_string(k), g.per_condition[k]);
    }
    stat_csv(out, g.group, "all", g.aggregate);
  }
  return out;
}

std::string MetricReport::samples_csv() const {
  std::string out = "group,object_id,condition,l1,l1_masked,ssim\n";
  for (const auto& s : samples) {
    out += s.group + "," + std::to_string(s.object_id) + "," + std::to_string(s.condition) + "," +
           format_double(s.l1) + "," + format_double(s.l1_masked) + "," + format_double(s.ssim) +
           "\n";
  }
  return out;
}

std::string MetricReport::to_text() const {
  std::string out;
  for (const auto& g : groups) {
    out += g.group + " (" + std::to_string(g.aggregate.l1.count) + " predictions)\n";
    out += "  condition      L1                 L1^M               SSIM\n";
    auto line = [&](const std::string& label, const MetricStats& s) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  %-9s  %.4f +- %.4f    %.4f +- %.4f    %.4f +- %.4f\n",
                    label.c_str(), s.l1.mean, s.l1.std, s.l1_masked.mean, s.l1_masked.std,
                    s.ssim.mean, s.ssim.std);
      out += buf;
    };
    for (std::size_t k = 0; k < g.per_condition.size(); ++k) line(std::to_string(k), g.per_condition[k]);
    line("all", g.aggregate);
  }
  return out;
}

MetricReport summarize(std::vector<SampleMetrics> samples) {
  MetricReport report;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SampleMetrics*>> by_group;
  report.samples = std::move(samples);
  for (const auto& s : report.samples) {
    if (!by_group.count(s.group)) order.push_back(s.group);
    by_group[s.group].push_back(&s);
  }
  for (const auto& name : order) {
    const auto& rows = by_group[name];
    GroupReport g;
    g.group = name;
    int conditions = 0;
    for (const auto* r : rows) conditions = std::max(conditions, r->condition + 1);
    for (int k = 0; k < conditions; ++k) {
      std::vector<const SampleMetrics*> subset;
      for (const auto* r : rows) {
        if (r->condition == k) subset.push_back(r);
      }
      g.per_condition.push_back(stats_of(subset));
    }
    g.aggregate = stats_of(rows);
    report.groups.push_back(std::move(g));
  }
  return report;
}

EvalResult evaluate(const Predictor& predictor, const Dataset& dataset, const std::string& group,
                    const EvalOptions& options) {
  if (dataset.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const std::size_t bs = std::max<std::size_t>(1, options.batch_size);
  const std::size_t K = dataset.conditions;
  std::vector<SampleMetrics> samples(dataset.size() * K);
  std::vector<std::vector<Image>> grid_rows;

  for (std::size_t begin = 0; begin < dataset.size(); begin += bs) {
    std::vector<std::size_t> indices;
    for (std::size_t i = begin; i < std::min(dataset.size(), begin + bs); ++i) indices.push_back(i);
    const Batch batch = load_batch(dataset, indices);
    for (std::size_t k = 0; k < K; ++k) {
      const Tensor prediction = clamp_unit(predictor(batch, static_cast<int>(k)));
      const Tensor& target = batch.targets[k];
      if (prediction.shape() != target.shape()) {
        throw DimensionError("evaluate: prediction shape " + to_string(prediction.shape()) +
                             " differs from target shape " + to_string(target.shape()));
      }
      for (std::size_t n = 0; n < indices.size(); ++n) {
        const Tensor p = slice_item(prediction, n), t = slice_item(target, n);
        SampleMetrics& m = samples[indices[n] * K + k];
        m.group = group;
        m.object_id = batch.object_ids[n];
        m.condition = static_cast<int>(k);
        m.l1 = metric_l1(p, t);
        m.l1_masked = metric_l1_masked(p, t, slice_item(batch.masks[k], n));
        m.ssim = metric_ssim(p, t);
        if (indices[n] < options.grid_samples) {
          grid_rows.push_back({tensor_to_image(batch.input, n), tensor_to_image(prediction, n),
                               tensor_to_image(target, n)});
        }
      }
    }
  }
  EvalResult result;
  result.samples = std::move(samples);
  if (!grid_rows.empty()) result.grid = compose_grid(grid_rows);
  return result;
}

EvalResult evaluate_model(const LtnnModel& model, const Dataset& dataset, const std::string& group,
                          const EvalOptions& options) {
  const ModelConfig& c = model.config();
  if (dataset.height != static_cast<std::uint32_t>(c.image_size) ||
      dataset.width != static_cast<std::uint32_t>(c.image_size) ||
      dataset.conditions != static_cast<std::uint32_t>(c.conditions)) {
    throw DimensionError("model config (image_size=" + std::to_string(c.image_size) +
                         ", conditions=" + std::to_string(c.conditions) +
                         ") is incompatible with dataset (" + std::to_string(dataset.height) + "x" +
                         std::to_string(dataset.width) + ", conditions=" +
                         std::to_string(dataset.conditions) + ")");
  }
  auto predictor = [&model](const Batch& batch, int k) {
    NoGradScope no_grad;
    return model.predict(batch.input, k).image;
  };
  return evaluate(predictor, dataset, group, options);
}

}  // namespace ltnn
