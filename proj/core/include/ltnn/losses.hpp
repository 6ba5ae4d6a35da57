#pragma once

#include <cstdint>
#include <string>

#include "ltnn/config.hpp"
#include "ltnn/tensor.hpp"

namespace ltnn {

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr Real kProbabilityEpsilon = Real(1e-7);

/// Weights of the generator objective. Defaults keep the adversarial and
/// reconstruction terms dominant over smoothness and consistency.
struct LossWeights {
  double adversarial = 1.0;     // lambda
  double reconstruction = 10.0; // rho
  double smoothness = 0.05;     // gamma
  double consistency = 0.05;    // kappa

  void bind(ConfigBinder& binder);
  /// Throws std::invalid_argument for negative or non-finite weights.
  void validate() const;
};

/// Unweighted loss components plus the weighted generator total.
struct LossBreakdown {
  double adv_d = 0;
  double adv_g = 0;
  double recon = 0;
  double smooth = 0;
  double consist = 0;
  double total = 0;
};

// Every loss sums over the elements of one item and averages over the batch.

/// mean_n [ -log D(y) - log(1 - D(y^)) ]
Tensor loss_adv_d(const Tensor& d_real, const Tensor& d_fake);
/// mean_n [ -log D(y^) ]
Tensor loss_adv_g(const Tensor& d_fake);
/// Squared L2 distance per image.
Tensor loss_recon(const Tensor& prediction, const Tensor& target);
/// 1/8 * sum over the nine shifts (i, j) in {-1,0,1}^2 of ||y - shift(y, i, j)||_1;
/// the (0, 0) term vanishes.
Tensor loss_smooth(const Tensor& prediction);
/// L1 distance between the transformed and the target latent.
Tensor loss_consist(const Tensor& transformed_latent, const Tensor& target_latent);

struct GeneratorTerms {
  Tensor adv_g;
  Tensor recon;
  Tensor smooth;
  Tensor consist;
};

/// lambda * adv + rho * recon + gamma * smooth + kappa * consist as a graph
/// node. Terms with zero weight are left out of the graph.
Tensor weighted_generator_loss(const GeneratorTerms& terms, const LossWeights& weights);

/// Fills `total` from the components. Throws TrainingAborted naming the first
/// non-finite component.
LossBreakdown loss_total(double adv_g, double recon, double smooth, double consist,
                         const LossWeights& weights, double adv_d = 0);

/// "step,adv_d,adv_g,recon,smooth,consist,total"
std::string loss_csv_header();
std::string loss_csv_row(std::uint64_t step, const LossBreakdown& b);

}  // namespace ltnn
