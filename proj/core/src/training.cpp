#include "ltnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ltnn/errors.hpp"

namespace ltnn {

namespace {

constexpr const char* kStepRecord = "train.step";

std::vector<std::vector<Real>> snapshot(const std::vector<NamedTensor>& params) {
  std::vector<std::vector<Real>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void expect_unchanged(const std::vector<NamedTensor>& params,
                      const std::vector<std::vector<Real>>& before, int k) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto now = params[i].tensor.data();
    if (!std::equal(now.begin(), now.end(), before[i].begin())) {
      throw std::logic_error("step conditioned on k=" + std::to_string(k) + " changed " +
                             params[i].name);
    }
  }
}

void clear_grads(const std::vector<NamedTensor>& params) {
  for (auto p : params) p.tensor.clear_grad();
}

}  // namespace

void AdamConfig::bind(ConfigBinder& b) {
  b.bind("lr", lr);
  b.bind("beta1", beta1);
  b.bind("beta2", beta2);
  b.bind("adam_eps", eps);
}

void AdamConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw std::invalid_argument("ADAM betas must lie in [0, 1)");
  }
  if (!(eps > 0)) throw std::invalid_argument("adam_eps must be positive");
}

void adam_update(const std::string& name, Tensor& param, std::span<const Real> grad, AdamSlot& slot,
                 const AdamConfig& config) {
  const std::size_t n = param.numel();
  if (grad.size() != n) {
    throw DimensionError("adam_update(" + name + "): gradient has " + std::to_string(grad.size()) +
                         " values for a parameter of shape " + to_string(param.shape()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) {
      throw TrainingAborted("non-finite gradient in parameter " + name + " at element " +
                            std::to_string(i));
    }
  }
  if (slot.m.empty()) {
    slot.m.assign(n, Real(0));
    slot.v.assign(n, Real(0));
  }
  if (slot.m.size() != n) {
    throw DimensionError("adam_update(" + name + "): optimizer state does not match shape " +
                         to_string(param.shape()));
  }
  slot.t += 1;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(slot.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(slot.t));
  auto p = param.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    slot.m[i] = static_cast<Real>(b1 * slot.m[i] + (1.0 - b1) * g);
    slot.v[i] = static_cast<Real>(b2 * slot.v[i] + (1.0 - b2) * g * g);
    const double m_hat = slot.m[i] / c1;
    const double v_hat = slot.v[i] / c2;
    p[i] = static_cast<Real>(p[i] - config.lr * m_hat / (std::sqrt(v_hat) + config.eps));
  }
}

void Adam::step(const std::vector<NamedTensor>& params) {
  for (auto p : params) {
    if (!p.tensor.has_grad()) continue;
    adam_update(p.name, p.tensor, p.tensor.grad(), slots_[p.name], config_);
  }
}

const AdamSlot* Adam::slot(const std::string& name) const {
  auto it = slots_.find(name);
  return it == slots_.end() ? nullptr : &it->second;
}

void Adam::store(Checkpoint& checkpoint) const {
  for (const auto& [name, slot] : slots_) {
    const Shape shape{slot.m.size()};
    checkpoint.put("adam.m/" + name, shape, slot.m);
    checkpoint.put("adam.v/" + name, shape, slot.v);
    const Real t = static_cast<Real>(slot.t);
    checkpoint.put("adam.t/" + name, Shape{1}, std::span<const Real>(&t, 1));
  }
}

void Adam::load(const Checkpoint& checkpoint) {
  slots_.clear();
  const std::string prefix = "adam.t/";
  for (const auto& record : checkpoint.records) {
    if (record.name.rfind(prefix, 0) != 0) continue;
    const std::string name = record.name.substr(prefix.size());
    const auto* m = checkpoint.find("adam.m/" + name);
    const auto* v = checkpoint.find("adam.v/" + name);
    if (!m || !v || record.values.size() != 1 || m->values.size() != v->values.size()) {
      throw std::runtime_error("checkpoint has incomplete ADAM state for " + name);
    }
    AdamSlot slot;
    slot.m.assign(m->values.begin(), m->values.end());
    slot.v.assign(v->values.begin(), v->values.end());
    slot.t = static_cast<std::uint64_t>(record.values[0]);
    slots_.emplace(name, std::move(slot));
  }
}

void TrainConfig::bind(ConfigBinder& b) {
  model.bind(b);
  weights.bind(b);
  adam.bind(b);
  b.bind("epochs", epochs);
  b.bind("batch_size", batch_size);
  b.bind("max_steps", max_steps);
  b.bind("seed", seed);
  b.bind("checkpoint_interval", checkpoint_interval);
  b.bind("clip_grad_norm", clip_grad_norm);
  b.bind("check_isolation", check_isolation);
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  adam.validate();
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(clip_grad_norm >= 0)) throw std::invalid_argument("clip_grad_norm must be >= 0");
}

std::string TrainConfig::to_text() const {
  TrainConfig copy = *this;
  ConfigBinder b;
  copy.bind(b);
  return b.to_text();
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig config;
  ConfigBinder b;
  config.bind(b);
  b.load_text(text, "train config");
  return config;
}

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)), model_(config_.model, config_.seed), adam_(config_.adam) {
  config_.validate();
}

namespace {

void check_step_args(const Batch& batch, int k, int conditions) {
  if (k < 0 || k >= conditions) {
    throw std::out_of_range("condition " + std::to_string(k) + " outside [0, " +
                            std::to_string(conditions) + ")");
  }
  if (static_cast<std::size_t>(k) >= batch.targets.size()) {
    throw std::out_of_range("batch has no target for condition " + std::to_string(k));
  }
}

}  // namespace

Trainer::GeneratorPhase Trainer::generator_phase(const Batch& batch, int k) {
  check_step_args(batch, k, config_.model.conditions);
  const Tensor& target = batch.targets[static_cast<std::size_t>(k)];
  const auto all = model_.parameters();
  // The discriminator is frozen but still passes gradient through to y^.
  set_requires_grad(all, false);
  const auto generator = model_.generator_parameters(k);
  set_requires_grad(generator, true);
  clear_grads(all);
  GeneratorPhase out;
  try {
    Tape tape;
    TapeScope scope(tape);
    const Prediction pred = model_.predict(batch.input, k);
    Tensor target_latent;
    {
      NoGradScope no_grad;
      target_latent = model_.encode(target);
    }
    GeneratorTerms terms;
    terms.adv_g = loss_adv_g(model_.discriminate(pred.image, k));
    terms.recon = loss_recon(pred.image, target);
    terms.smooth = loss_smooth(pred.image);
    terms.consist = loss_consist(pred.transformed, target_latent);
    out.losses = loss_total(terms.adv_g.item(), terms.recon.item(), terms.smooth.item(),
                            terms.consist.item(), config_.weights);
    tape.backward(weighted_generator_loss(terms, config_.weights));
    out.fake = pred.image.detach();
    clip(generator);
    adam_.step(generator);
  } catch (...) {
    clear_grads(all);
    set_requires_grad(all, true);
    throw;
  }
  clear_grads(all);
  set_requires_grad(all, true);
  return out;
}

double Trainer::discriminator_phase(const Batch& batch, int k, const Tensor& fake) {
  check_step_args(batch, k, config_.model.conditions);
  const Tensor& target = batch.targets[static_cast<std::size_t>(k)];
  const auto all = model_.parameters();
  set_requires_grad(all, false);
  const auto discriminator = model_.discriminator_parameters(k);
  set_requires_grad(discriminator, true);
  clear_grads(all);
  double adv_d = 0;
  try {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = loss_adv_d(model_.discriminate(target, k), model_.discriminate(fake.detach(), k));
    adv_d = loss.item();
    if (!std::isfinite(adv_d)) throw TrainingAborted("non-finite loss component adv_d");
    tape.backward(loss);
    clip(discriminator);
    adam_.step(discriminator);
  } catch (...) {
    clear_grads(all);
    set_requires_grad(all, true);
    throw;
  }
  clear_grads(all);
  set_requires_grad(all, true);
  return adv_d;
}

LossBreakdown Trainer::train_step(const Batch& batch, int k) {
  check_step_args(batch, k, config_.model.conditions);
  std::vector<NamedTensor> others;
  std::vector<std::vector<Real>> before;
  if (config_.check_isolation) {
    for (int j = 0; j < config_.model.conditions; ++j) {
      if (j == k) continue;
      for (auto& p : model_.conditional_parameters(j)) others.push_back(p);
      for (auto& p : model_.discriminator_conditional_parameters(j)) others.push_back(p);
    }
    before = snapshot(others);
  }
  LossBreakdown out;
  try {
    const GeneratorPhase g = generator_phase(batch, k);
    const double adv_d = discriminator_phase(batch, k, g.fake);
    out = loss_total(g.losses.adv_g, g.losses.recon, g.losses.smooth, g.losses.consist,
                     config_.weights, adv_d);
  } catch (const TrainingAborted& e) {
    throw TrainingAborted("step " + std::to_string(step_ + 1) + " (k=" + std::to_string(k) +
                          "): " + e.what());
  }
  if (config_.check_isolation) expect_unchanged(others, before, k);
  ++step_;
  return out;
}

void Trainer::clip(const std::vector<NamedTensor>& params) const {
  if (config_.clip_grad_norm <= 0) return;
  double sq = 0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (Real g : p.tensor.grad()) sq += double(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > config_.clip_grad_norm)) return;
  const Real factor = static_cast<Real>(config_.clip_grad_norm / norm);
  for (auto p : params) {
    if (!p.tensor.has_grad()) continue;
    for (Real& g : p.tensor.mutable_grad()) g *= factor;
  }
}

void Trainer::check_dataset(const Dataset& dataset) const {
  const auto& m = config_.model;
  if (dataset.size() == 0 || dataset.height != static_cast<std::uint32_t>(m.image_size) ||
      dataset.width != static_cast<std::uint32_t>(m.image_size) ||
      dataset.conditions != static_cast<std::uint32_t>(m.conditions)) {
    throw DimensionError("dataset (" + std::to_string(dataset.size()) + " samples, " +
                         std::to_string(dataset.height) + "x" + std::to_string(dataset.width) +
                         ", conditions=" + std::to_string(dataset.conditions) +
                         ") does not fit the model (image_size=" + std::to_string(m.image_size) +
                         ", conditions=" + std::to_string(m.conditions) + ")");
  }
}

std::uint64_t Trainer::steps_per_epoch(const Dataset& dataset) const {
  const std::uint64_t bs = static_cast<std::uint64_t>(config_.batch_size);
  const std::uint64_t batches = (dataset.size() + bs - 1) / bs;
  return batches * static_cast<std::uint64_t>(config_.model.conditions);
}

std::uint64_t Trainer::total_steps(const Dataset& dataset) const {
  const std::uint64_t all = steps_per_epoch(dataset) * static_cast<std::uint64_t>(config_.epochs);
  return config_.max_steps > 0 ? std::min(all, config_.max_steps) : all;
}

namespace {

// Keeps the header and the rows up to `step` so a resumed run appends
// exactly where the checkpoint left off.
void prepare_csv(const std::filesystem::path& path, std::uint64_t step) {
  std::vector<std::string> keep{loss_csv_header()};
  if (step > 0) {
    std::ifstream in(path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        continue;
      }
      if (line.empty()) continue;
      if (std::stoull(line.substr(0, line.find(','))) > step) break;
      keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& row : keep) out << row << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void Trainer::train(const Dataset& dataset, const TrainOutputs& outputs) {
  check_dataset(dataset);
  const std::uint64_t total = total_steps(dataset);
  const std::uint64_t per_epoch = steps_per_epoch(dataset);
  const auto K = static_cast<std::uint64_t>(config_.model.conditions);
  const auto bs = static_cast<std::size_t>(config_.batch_size);

  std::ofstream csv;
  const bool files = !outputs.out.empty();
  if (files) {
    std::filesystem::create_directories(outputs.out);
    write_text(outputs.out / "config.txt", config_.to_text());
    prepare_csv(outputs.out / "loss.csv", step_);
    csv.open(outputs.out / "loss.csv", std::ios::app);
  }

  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::uint64_t cached_batch = ~std::uint64_t{0};
  std::vector<std::size_t> order;
  Batch batch;
  while (step_ < total) {
    const std::uint64_t epoch = step_ / per_epoch;
    const std::uint64_t within = step_ % per_epoch;
    const std::uint64_t b = within / K;
    const int k = static_cast<int>(within % K);
    if (epoch != cached_epoch) {
      order = epoch_order(dataset.size(), config_.seed, epoch);
      cached_epoch = epoch;
      cached_batch = ~std::uint64_t{0};
    }
    if (b != cached_batch) {
      const std::size_t begin = static_cast<std::size_t>(b) * bs;
      const std::size_t end = std::min(order.size(), begin + bs);
      batch = load_batch(dataset, std::span<const std::size_t>(order).subspan(begin, end - begin));
      cached_batch = b;
    }
    const LossBreakdown losses = train_step(batch, k);
    if (files) {
      csv << loss_csv_row(step_, losses) << '\n';
      csv.flush();
    }
    if (outputs.on_step) outputs.on_step(step_, losses);
    if (files && config_.checkpoint_interval > 0 && step_ % config_.checkpoint_interval == 0) {
      write_checkpoint((outputs.out / ("checkpoint_" + std::to_string(step_) + ".ltnn")).string(),
                       checkpoint());
    }
  }
  if (files) write_checkpoint((outputs.out / "checkpoint_final.ltnn").string(), checkpoint());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config_text = config_.to_text();
  store_model(c, model_);
  adam_.store(c);
  const Real step = static_cast<Real>(step_);
  c.put(kStepRecord, Shape{1}, std::span<const Real>(&step, 1));
  return c;
}

void Trainer::restore(const Checkpoint& checkpoint) {
  const ModelConfig saved = model_config_from_block(checkpoint.config_text);
  if (saved.to_text() != config_.model.to_text()) {
    throw DimensionError("checkpoint model config differs from the trainer's.\ncheckpoint:\n" +
                         saved.to_text() + "trainer:\n" + config_.model.to_text());
  }
  load_model_parameters(checkpoint, model_);
  adam_.load(checkpoint);
  const auto* step = checkpoint.find(kStepRecord);
  step_ = step && step->values.size() == 1 ? static_cast<std::uint64_t>(step->values[0]) : 0;
}

}  // namespace ltnn
