#pragma once

#include "nsp/autodiff.hpp"
#include "nsp/types.hpp"

#include <random>
#include <span>
#include <vector>

namespace nsp {

// Residual model over the per-step gap between deterministic prediction and
// observation. All encoders/decoders operate on inputs pre-multiplied by
// cvae_scale; cvae_sample undoes the scale on its output.
struct CvaeModel {
  static constexpr int kHistoryLen = kObservedLen;  // 8 positions
  static constexpr int kBiasEmbed = 16;
  static constexpr int kPastEmbed = 32;

  std::vector<ad::DenseLayer> e_bias;    // alpha -> f_bias
  std::vector<ad::DenseLayer> e_past;    // flattened history -> f_past
  std::vector<ad::DenseLayer> e_latent;  // [f_bias; f_past] -> [mu; logvar]
  std::vector<ad::DenseLayer> d_latent;  // [z; f_past] -> alpha_hat
  int latent_dim = 16;

  CvaeModel();
  void init(std::mt19937_64& rng);
  std::vector<ad::Tensor*> tensors();
};

// What must be added to the deterministic prediction to recover the truth.
Vec2 residual(const Vec2& p_true, const Vec2& p_bar);

struct CvaeForward {
  ad::Value alpha_hat;  // reconstruction, scaled units
  ad::Value mu;
  ad::Value logvar;
};

// z = mu + exp(logvar / 2) .* eps
ad::Value reparameterize(ad::Tape& tape, ad::Value mu, ad::Value logvar, const Eigen::VectorXd& eps);

// Training pass on one residual. alpha_scaled is 2x1 and history_scaled
// 16x1 (8 positions, oldest first), both already multiplied by cvae_scale.
// The eps overload is the deterministic core; the rng overload draws
// eps ~ N(0, I).
CvaeForward cvae_train_forward(ad::Tape& tape, const CvaeModel& m, const Eigen::MatrixXd& alpha_scaled,
                               const Eigen::MatrixXd& history_scaled, const Eigen::VectorXd& eps);
CvaeForward cvae_train_forward(ad::Tape& tape, const CvaeModel& m, const Eigen::MatrixXd& alpha_scaled,
                               const Eigen::MatrixXd& history_scaled, std::mt19937_64& rng);

// KL(N(mu, diag(exp(logvar))) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - logvar)
double kl_to_standard_normal(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar);
ad::Value kl_to_standard_normal(ad::Tape& tape, ad::Value mu, ad::Value logvar);

// Flattens 8 positions (oldest first) into a 16x1 column times cvae_scale.
Eigen::MatrixXd scaled_history(std::span<const Vec2> history, double cvae_scale);

// Test-time draw: z ~ N(0, sigma_latent^2 I), decoded against the history
// encoding and rescaled back to pixel units.
Vec2 cvae_sample(const CvaeModel& m, std::span<const Vec2> history, const NspConfig& cfg,
                 std::mt19937_64& rng);

}  // namespace nsp
