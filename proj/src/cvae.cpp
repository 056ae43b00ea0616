#include "nsp/cvae.hpp"

#include <cmath>

namespace nsp {

using ad::Activation;
using ad::Tape;
using ad::Value;

CvaeModel::CvaeModel() {
  e_bias.emplace_back("cvae.e_bias0", 2, kBiasEmbed, Activation::Relu);
  e_past.emplace_back("cvae.e_past0", 2 * kHistoryLen, kPastEmbed, Activation::Relu);
  e_past.emplace_back("cvae.e_past1", kPastEmbed, kPastEmbed, Activation::Relu);
  e_latent.emplace_back("cvae.e_latent0", kBiasEmbed + kPastEmbed, 32, Activation::Relu);
  e_latent.emplace_back("cvae.e_latent1", 32, 2 * latent_dim, Activation::Identity);
  d_latent.emplace_back("cvae.d_latent0", latent_dim + kPastEmbed, 32, Activation::Relu);
  d_latent.emplace_back("cvae.d_latent1", 32, 2, Activation::Identity);
}

void CvaeModel::init(std::mt19937_64& rng) {
  for (auto* stack : {&e_bias, &e_past, &e_latent, &d_latent}) {
    for (auto& l : *stack) ad::init_dense(l, rng);
  }
}

std::vector<ad::Tensor*> CvaeModel::tensors() {
  std::vector<ad::Tensor*> out;
  for (auto* stack : {&e_bias, &e_past, &e_latent, &d_latent}) {
    for (auto& l : *stack) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  }
  return out;
}

Vec2 residual(const Vec2& p_true, const Vec2& p_bar) {
  return p_true - p_bar;
}

Value reparameterize(Tape& tape, Value mu, Value logvar, const Eigen::VectorXd& eps) {
  if (eps.rows() != mu.rows() || mu.rows() != logvar.rows()) {
    throw ad::ShapeMismatch("reparameterize: mu, logvar, eps disagree on latent size");
  }
  Value sigma = ad::exp_(ad::scale(logvar, 0.5));
  return ad::add(mu, ad::hadamard(sigma, tape.constant(eps)));
}

CvaeForward cvae_train_forward(Tape& tape, const CvaeModel& m, const Eigen::MatrixXd& alpha_scaled,
                               const Eigen::MatrixXd& history_scaled, const Eigen::VectorXd& eps) {
  if (alpha_scaled.rows() != 2 || alpha_scaled.cols() != 1) {
    throw ad::ShapeMismatch("cvae_train_forward: alpha must be 2x1");
  }
  if (history_scaled.rows() != 2 * CvaeModel::kHistoryLen || history_scaled.cols() != 1) {
    throw ad::ShapeMismatch("cvae_train_forward: history must be 16x1");
  }
  Value f_bias = ad::mlp_forward(tape, m.e_bias, tape.constant(alpha_scaled));
  Value f_past = ad::mlp_forward(tape, m.e_past, tape.constant(history_scaled));
  Value stats = ad::mlp_forward(tape, m.e_latent, ad::concat(f_bias, f_past));
  Value mu = ad::slice(stats, 0, m.latent_dim);
  Value logvar = ad::slice(stats, m.latent_dim, m.latent_dim);
  Value z = reparameterize(tape, mu, logvar, eps);
  Value alpha_hat = ad::mlp_forward(tape, m.d_latent, ad::concat(z, f_past));
  return CvaeForward{alpha_hat, mu, logvar};
}

CvaeForward cvae_train_forward(Tape& tape, const CvaeModel& m, const Eigen::MatrixXd& alpha_scaled,
                               const Eigen::MatrixXd& history_scaled, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd eps(m.latent_dim);
  for (int i = 0; i < m.latent_dim; ++i) eps(i) = unit(rng);
  return cvae_train_forward(tape, m, alpha_scaled, history_scaled, eps);
}

double kl_to_standard_normal(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar) {
  if (mu.rows() != logvar.rows()) {
    throw ad::ShapeMismatch("kl_to_standard_normal: mu and logvar disagree");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.rows(); ++i) {
    acc += mu(i) * mu(i) + std::exp(logvar(i)) - 1.0 - logvar(i);
  }
  return 0.5 * acc;
}

Value kl_to_standard_normal(Tape& tape, Value mu, Value logvar) {
  if (mu.rows() != logvar.rows()) {
    throw ad::ShapeMismatch("kl_to_standard_normal: mu and logvar disagree");
  }
  const double dim = static_cast<double>(mu.rows());
  Value fit = ad::add(ad::sum_sq(mu), ad::sum(ad::exp_(logvar)));
  Value ref = ad::add(tape.scalar_constant(dim), ad::sum(logvar));
  return ad::scale(ad::sub(fit, ref), 0.5);
}

Eigen::MatrixXd scaled_history(std::span<const Vec2> history, double cvae_scale) {
  if (history.size() != CvaeModel::kHistoryLen) {
    throw ad::ShapeMismatch("scaled_history: expected " + std::to_string(CvaeModel::kHistoryLen) +
                            " positions, got " + std::to_string(history.size()));
  }
  Eigen::MatrixXd out(2 * CvaeModel::kHistoryLen, 1);
  for (std::size_t i = 0; i < history.size(); ++i) {
    out(2 * i, 0) = history[i].x() * cvae_scale;
    out(2 * i + 1, 0) = history[i].y() * cvae_scale;
  }
  return out;
}

Vec2 cvae_sample(const CvaeModel& m, std::span<const Vec2> history, const NspConfig& cfg,
                 std::mt19937_64& rng) {
  Tape tape;
  Value f_past = ad::mlp_forward(tape, m.e_past, tape.constant(scaled_history(history, cfg.cvae_scale)));
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd z(m.latent_dim, 1);
  for (int i = 0; i < m.latent_dim; ++i) z(i, 0) = cfg.sigma_latent * unit(rng);
  Value alpha_hat = ad::mlp_forward(tape, m.d_latent, ad::concat(tape.constant(z), f_past));
  return Vec2(alpha_hat.m()(0, 0), alpha_hat.m()(1, 0)) / cfg.cvae_scale;
}

}  // namespace nsp
