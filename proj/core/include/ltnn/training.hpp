#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ltnn/checkpoint.hpp"
#include "ltnn/config.hpp"
#include "ltnn/dataset.hpp"
#include "ltnn/losses.hpp"
#include "ltnn/model.hpp"

namespace ltnn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  void bind(ConfigBinder& binder);
  void validate() const;
};

/// Moments of one parameter and the number of updates applied to it.
struct AdamSlot {
  std::vector<Real> m;
  std::vector<Real> v;
  std::uint64_t t = 0;
};

/// One bias-corrected ADAM step on `param`. Throws TrainingAborted naming
/// `name` if the gradient holds a non-finite value (the parameter and slot
/// are left untouched), DimensionError if the sizes disagree.
void adam_update(const std::string& name, Tensor& param, std::span<const Real> grad, AdamSlot& slot,
                 const AdamConfig& config);

/// ADAM state for a set of named parameters.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Updates every parameter in `params` that received a gradient.
  void step(const std::vector<NamedTensor>& params);

  const AdamConfig& config() const { return config_; }
  const AdamSlot* slot(const std::string& name) const;
  const std::map<std::string, AdamSlot>& slots() const { return slots_; }

  /// Records "adam.m/<name>", "adam.v/<name>" and "adam.t/<name>".
  void store(Checkpoint& checkpoint) const;
  void load(const Checkpoint& checkpoint);

 private:
  AdamConfig config_;
  std::map<std::string, AdamSlot> slots_;
};

struct TrainConfig {
  ModelConfig model;
  LossWeights weights;
  AdamConfig adam;
  int epochs = 1;
  int batch_size = 8;
  /// Stop after this many steps (0 = run every epoch). A step is one
  /// generator update followed by one discriminator update for a (batch, k).
  std::uint64_t max_steps = 0;
  std::uint64_t seed = 1;
  /// Checkpoint every this many steps (0 = only at the end).
  std::uint64_t checkpoint_interval = 0;
  /// Global L2 norm bound per update set (0 = off).
  double clip_grad_norm = 0;
  /// Verify after each step that no other condition's weights moved.
  bool check_isolation = false;

  void bind(ConfigBinder& binder);
  void validate() const;
  std::string to_text() const;
  static TrainConfig from_text(std::string_view text);
};

/// Where train() puts its artefacts; an empty `out` writes nothing.
struct TrainOutputs {
  std::filesystem::path out;
  std::function<void(std::uint64_t step, const LossBreakdown&)> on_step;
};

class Trainer {
 public:
  /// Builds a fresh model from config.model seeded with config.seed.
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const LtnnModel& model() const { return model_; }
  const Adam& adam() const { return adam_; }
  /// Steps completed so far.
  std::uint64_t step() const { return step_; }

  /// Generator phase then discriminator phase for condition k.
  LossBreakdown train_step(const Batch& batch, int k);

  struct GeneratorPhase {
    LossBreakdown losses;  // adv_d not yet filled in
    Tensor fake;           // detached prediction for the discriminator phase
  };
  /// Updates theta_E, theta_D, the RGB balance and mapping k only.
  GeneratorPhase generator_phase(const Batch& batch, int k);
  /// Updates the shared discriminator weights and CDU k only; returns adv_d.
  double discriminator_phase(const Batch& batch, int k, const Tensor& fake);

  /// Steps needed for the configured epochs (before max_steps).
  std::uint64_t steps_per_epoch(const Dataset& dataset) const;
  std::uint64_t total_steps(const Dataset& dataset) const;

  /// Runs from step() up to total_steps(). Batch order depends only on
  /// (seed, epoch), so a trainer restored from a checkpoint continues
  /// exactly where the saved one stopped.
  void train(const Dataset& dataset, const TrainOutputs& outputs = {});

  /// Model parameters, ADAM state and the step counter.
  Checkpoint checkpoint() const;
  /// Restores state saved by checkpoint(); the model configs must match.
  void restore(const Checkpoint& checkpoint);

 private:
  void check_dataset(const Dataset& dataset) const;
  void clip(const std::vector<NamedTensor>& params) const;

  TrainConfig config_;
  LtnnModel model_;
  Adam adam_;
  std::uint64_t step_ = 0;
};

}  // namespace ltnn
