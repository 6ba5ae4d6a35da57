#include "ltnn/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ltnn/errors.hpp"
#include "ltnn/ops.hpp"

namespace ltnn {

namespace {

Real batch_scale(const Tensor& t) {
  if (!t.defined() || t.rank() == 0) throw DimensionError("loss input needs a batch axis");
  return Real(1) / static_cast<Real>(t.dim(0));
}

Tensor neg_log_prob(const Tensor& p) {
  return scale(log(clamp(p, kProbabilityEpsilon, 1 - kProbabilityEpsilon)), Real(-1));
}

void check_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

}  // namespace

void LossWeights::bind(ConfigBinder& b) {
  b.bind("lambda_adv", adversarial);
  b.bind("rho_recon", reconstruction);
  b.bind("gamma_smooth", smoothness);
  b.bind("kappa_consist", consistency);
}

void LossWeights::validate() const {
  for (double w : {adversarial, reconstruction, smoothness, consistency}) {
    if (!std::isfinite(w) || w < 0) {
      throw std::invalid_argument("loss weights must be finite and non-negative");
    }
  }
}

Tensor loss_adv_d(const Tensor& d_real, const Tensor& d_fake) {
  check_same(d_real, d_fake, "loss_adv_d");
  const Tensor real_term = neg_log_prob(d_real);
  const Tensor fake_term = scale(log(clamp(affine(d_fake, Real(-1), Real(1)), kProbabilityEpsilon,
                                           1 - kProbabilityEpsilon)),
                                 Real(-1));
  return scale(sum(add(real_term, fake_term)), batch_scale(d_real));
}

Tensor loss_adv_g(const Tensor& d_fake) {
  return scale(sum(neg_log_prob(d_fake)), batch_scale(d_fake));
}

Tensor loss_recon(const Tensor& prediction, const Tensor& target) {
  check_same(prediction, target, "loss_recon");
  return scale(sum(square(sub(prediction, target))), batch_scale(prediction));
}

Tensor loss_smooth(const Tensor& prediction) {
  Tensor total;
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      if (i == 0 && j == 0) continue;
      Tensor term = sum(abs(sub(prediction, shift(prediction, i, j))));
      total = total.defined() ? add(total, term) : term;
    }
  }
  return scale(total, batch_scale(prediction) / Real(8));
}

Tensor loss_consist(const Tensor& transformed_latent, const Tensor& target_latent) {
  check_same(transformed_latent, target_latent, "loss_consist");
  return scale(sum(abs(sub(transformed_latent, target_latent))), batch_scale(transformed_latent));
}

Tensor weighted_generator_loss(const GeneratorTerms& terms, const LossWeights& weights) {
  Tensor total;
  auto accumulate = [&total](const Tensor& term, double w) {
    if (w == 0 || !term.defined()) return;
    Tensor weighted = scale(term, static_cast<Real>(w));
    total = total.defined() ? add(total, weighted) : weighted;
  };
  accumulate(terms.adv_g, weights.adversarial);
  accumulate(terms.recon, weights.reconstruction);
  accumulate(terms.smooth, weights.smoothness);
  accumulate(terms.consist, weights.consistency);
  return total.defined() ? total : Tensor::scalar(0);
}

LossBreakdown loss_total(double adv_g, double recon, double smooth, double consist,
                         const LossWeights& weights, double adv_d) {
  const std::pair<const char*, double> parts[] = {
      {"adv_g", adv_g}, {"recon", recon}, {"smooth", smooth}, {"consist", consist}, {"adv_d", adv_d}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) {
      throw TrainingAborted(std::string("non-finite loss component ") + name);
    }
  }
  LossBreakdown b{adv_d, adv_g, recon, smooth, consist, 0};
  b.total = weights.adversarial * adv_g + weights.reconstruction * recon +
            weights.smoothness * smooth + weights.consistency * consist;
  return b;
}

std::string loss_csv_header() { return "step,adv_d,adv_g,recon,smooth,consist,total"; }

std::string loss_csv_row(std::uint64_t step, const LossBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<unsigned long long>(step), b.adv_d, b.adv_g, b.recon, b.smooth,
                b.consist, b.total);
  return buf;
}

}  // namespace ltnn
