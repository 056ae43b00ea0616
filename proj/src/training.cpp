#include "nsp/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace nsp {

namespace {

constexpr int kFirstStep = kObservedLen - 1;
constexpr int kLastFrame = kWindowLen - 1;

const TrajectoryWindow& truth_for(std::span<const TrajectoryWindow> truth, std::int64_t id) {
  for (const auto& w : truth) {
    if (w.agent_id == id) return w;
  }
  throw ad::ShapeMismatch("loss_traj: no ground-truth window for agent " + std::to_string(id));
}

ForceOptions options_for(TrainStage stage) {
  ForceOptions opts;
  opts.raise_on_degenerate = false;
  if (stage == TrainStage::GoalOnly) {
    opts.enable_col = false;
    opts.enable_env = false;
  }
  return opts;
}

std::vector<ad::Tensor*> trainable_for(ModelParams& params, TrainStage stage) {
  switch (stage) {
    case TrainStage::GoalOnly:
      return params.goal_net.tensors();
    case TrainStage::AddRepulsion: {
      auto out = params.collision_net.tensors();
      out.push_back(&params.k_env);
      return out;
    }
    case TrainStage::CvaeOnly:
      return params.cvae.tensors();
  }
  throw Error("unknown training stage");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(k_env_init >= 0.0)) throw ConfigError("k_env_init must be >= 0");
}

ad::Value loss_traj(ad::Tape& tape, const GraphRollout& pred,
                    std::span<const TrajectoryWindow> truth) {
  if (pred.agent_ids.empty()) throw ad::ShapeMismatch("loss_traj: empty prediction");
  ad::Value acc = tape.scalar_constant(0.0);
  for (std::size_t i = 0; i < pred.agent_ids.size(); ++i) {
    const auto& w = truth_for(truth, pred.agent_ids[i]);
    if (pred.predicted_p[i].size() != kPredictLen || w.frames.size() != kWindowLen) {
      throw ad::ShapeMismatch("loss_traj: misaligned window");
    }
    for (int k = 0; k < kPredictLen; ++k) {
      const Vec2 p_true = w.frames[kObservedLen + k].p;
      acc = ad::add(acc, ad::sum_sq(ad::sub(pred.predicted_p[i][k], tape.constant(p_true))));
    }
  }
  const double scale = 1.0 / (static_cast<double>(pred.agent_ids.size()) * kPredictLen);
  return ad::scale(acc, scale);
}

double loss_traj(const RolloutResult& pred, std::span<const TrajectoryWindow> truth) {
  if (pred.agent_ids.empty()) throw ad::ShapeMismatch("loss_traj: empty prediction");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.agent_ids.size(); ++i) {
    const auto& w = truth_for(truth, pred.agent_ids[i]);
    if (pred.predicted[i].size() != kPredictLen || w.frames.size() != kWindowLen) {
      throw ad::ShapeMismatch("loss_traj: misaligned window");
    }
    for (int k = 0; k < kPredictLen; ++k) {
      const Vec2 d = pred.predicted[i][k].p - w.frames[kObservedLen + k].p;
      acc = acc + (d.x() * d.x() + d.y() * d.y());
    }
  }
  return acc * (1.0 / (static_cast<double>(pred.agent_ids.size()) * kPredictLen));
}

std::vector<ResidualSample> teacher_forced_residuals(const Cohort& cohort, const SceneGrid& grid,
                                                     const ModelParams& params,
                                                     const NspConfig& cfg) {
  cfg.validate();
  for (const auto& w : cohort.windows) validate_window(w);
  const auto& goal_net = params.goal_net;
  const int n = static_cast<int>(cohort.windows.size());
  const int hidden = GoalNetwork::kHiddenDim;

  std::vector<Eigen::MatrixXd> lstm_h(n, Eigen::MatrixXd::Zero(hidden, 1));
  std::vector<Eigen::MatrixXd> lstm_c(n, Eigen::MatrixXd::Zero(hidden, 1));
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < kFirstStep; ++t) {
      ad::Tape tape;
      auto st = goal_net.state_from(tape, lstm_h[i], lstm_c[i]);
      goal_ingest(tape, goal_net, st, state_input(tape, cohort.windows[i].frames[t]));
      lstm_h[i] = st.h.m();
      lstm_c[i] = st.c.m();
    }
  }

  ForceOptions opts;
  opts.raise_on_degenerate = false;

  std::vector<ResidualSample> out;
  out.reserve(static_cast<std::size_t>(n) * kPredictLen);
  for (int t = kFirstStep; t < kLastFrame; ++t) {
    for (int i = 0; i < n; ++i) {
      ad::Tape tape;
      std::vector<AgentNode> nodes;
      for (int j = 0; j < n; ++j) {
        nodes.push_back({tape.constant(cohort.windows[j].frames[t].p),
                         tape.constant(cohort.windows[j].frames[t].v)});
      }
      for (const auto& ob : cohort.obstacles) {
        if (!ob.covers(t)) continue;
        nodes.push_back({tape.constant(ob.at(t).p), tape.constant(ob.at(t).v)});
      }
      auto st = goal_net.state_from(tape, lstm_h[i], lstm_c[i]);
      auto fg = agent_force_graph(tape, nodes, static_cast<std::size_t>(i),
                                  tape.constant(cohort.windows[i].goal), grid, params, st, cfg, t,
                                  kLastFrame, opts);
      lstm_h[i] = st.h.m();
      lstm_c[i] = st.c.m();

      const Vec2 accel(fg.accel.m()(0, 0), fg.accel.m()(1, 0));
      const AgentState bar =
          semi_implicit_step(cohort.windows[i].frames[t], accel, Vec2(0.0, 0.0), cfg.dt);
      const Vec2 alpha = residual(cohort.windows[i].frames[t + 1].p, bar.p);

      std::vector<Vec2> past;
      past.reserve(kObservedLen);
      for (int s = t - kObservedLen + 1; s <= t; ++s) {
        past.push_back(cohort.windows[i].frames[s].p);
      }
      ResidualSample sample;
      sample.alpha = Eigen::MatrixXd(2, 1);
      sample.alpha << alpha.x() * cfg.cvae_scale, alpha.y() * cfg.cvae_scale;
      sample.history = scaled_history(past, cfg.cvae_scale);
      out.push_back(std::move(sample));
    }
  }
  return out;
}

CvaeLoss loss_cvae(ad::Tape& tape, std::span<const CvaeForward> forward,
                   std::span<const ResidualSample> batch, double lambda_kl) {
  if (forward.empty() || forward.size() != batch.size()) {
    throw ad::ShapeMismatch("loss_cvae: forward/batch size mismatch");
  }
  if (!(lambda_kl >= 0.0)) throw ConfigError("lambda_kl must be >= 0");

  ad::Value recon = tape.scalar_constant(0.0);
  ad::Value kl = tape.scalar_constant(0.0);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    recon = ad::add(recon,
                    ad::sum_sq(ad::sub(forward[i].alpha_hat, tape.constant(batch[i].alpha))));
    kl = ad::add(kl, kl_to_standard_normal(tape, forward[i].mu, forward[i].logvar));
  }
  const double inv = 1.0 / static_cast<double>(forward.size());
  recon = ad::scale(recon, inv);
  kl = ad::scale(kl, inv);

  CvaeLoss out{ad::add(recon, ad::scale(kl, lambda_kl)), recon.scalar(), kl.scalar()};
  return out;
}

void adam_update(std::span<ad::Tensor* const> params, AdamState& state, double lr, double beta1,
                 double beta2, double epsilon) {
  if (state.m.empty()) {
    for (const auto* t : params) {
      state.m.emplace_back(Eigen::MatrixXd::Zero(t->data.rows(), t->data.cols()));
      state.v.emplace_back(Eigen::MatrixXd::Zero(t->data.rows(), t->data.cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw ad::ShapeMismatch("adam_update: state tracks a different parameter set");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor* t = params[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * t->grad;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * t->grad.cwiseProduct(t->grad);
    const Eigen::MatrixXd m_hat = state.m[i] / bc1;
    const Eigen::MatrixXd v_hat = state.v[i] / bc2;
    t->data -=
        lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt() + Eigen::MatrixXd::Constant(
                                                         t->data.rows(), t->data.cols(), epsilon));
    if (t->name == "k_env") t->data = t->data.cwiseMax(0.0);
  }
}

void train_stage(std::span<const Cohort> data, const SceneGrid& grid, ModelParams& params,
                 const NspConfig& cfg, const TrainConfig& tc, std::vector<MetricRecord>& log) {
  tc.validate();
  cfg.validate();
  if (data.empty()) throw Error("train_stage: no training cohorts");

  auto trainable = trainable_for(params, tc.stage);
  if (tc.stage == TrainStage::AddRepulsion) params.k_env.data(0, 0) = tc.k_env_init;

  AdamState adam;
  std::mt19937_64 rng(tc.seed);
  const ForceOptions opts = options_for(tc.stage);

  // Stage 3 trains on a residual set frozen once at stage entry: the force
  // model no longer moves, so the residuals are constants of the stage.
  std::vector<ResidualSample> residuals;
  if (tc.stage == TrainStage::CvaeOnly) {
    for (const auto& cohort : data) {
      auto part = teacher_forced_residuals(cohort, grid, params, cfg);
      residuals.insert(residuals.end(), part.begin(), part.end());
    }
    if (residuals.empty()) throw Error("train_stage: no residual samples");
  }

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    double epoch_loss = 0.0;
    double epoch_recon = 0.0;
    double epoch_kl = 0.0;
    int batches = 0;

    if (tc.stage == TrainStage::CvaeOnly) {
      const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
      for (std::size_t at = 0; at < residuals.size(); at += bs) {
        const std::size_t end = std::min(residuals.size(), at + bs);
        ad::Tape tape;
        std::vector<CvaeForward> fwd;
        fwd.reserve(end - at);
        for (std::size_t s = at; s < end; ++s) {
          fwd.push_back(cvae_train_forward(tape, params.cvae, residuals[s].alpha,
                                           residuals[s].history, rng));
        }
        const auto batch =
            std::span<const ResidualSample>(residuals.data() + at, end - at);
        const CvaeLoss loss = loss_cvae(tape, fwd, batch, cfg.lambda_kl);
        const double value = loss.total.scalar();
        if (!std::isfinite(value)) {
          throw NonFiniteValue("stage 3 epoch " + std::to_string(epoch) + ": non-finite loss");
        }
        for (auto* t : trainable) t->zero_grad();
        tape.backward(loss.total);
        adam_update(trainable, adam, tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon);
        epoch_loss += value;
        epoch_recon += loss.recon;
        epoch_kl += loss.kl;
        ++batches;
      }
    } else {
      const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
      for (std::size_t at = 0; at < data.size(); at += bs) {
        const std::size_t end = std::min(data.size(), at + bs);
        for (auto* t : trainable) t->zero_grad();
        double batch_loss = 0.0;
        for (std::size_t c = at; c < end; ++c) {
          ad::Tape tape;
          const auto graph =
              graph_rollout(tape, data[c].windows, grid, params, cfg, opts, data[c].obstacles);
          ad::Value loss = loss_traj(tape, graph, data[c].windows);
          // Mean across the batch: scale each cohort's contribution before
          // backward so gradients accumulate to the batch mean.
          loss = ad::scale(loss, 1.0 / static_cast<double>(end - at));
          const double value = loss.scalar();
          if (!std::isfinite(value)) {
            throw NonFiniteValue("stage " + std::to_string(static_cast<int>(tc.stage) + 1) +
                                 " epoch " + std::to_string(epoch) + ": non-finite loss");
          }
          tape.backward(loss);
          batch_loss += value;
        }
        adam_update(trainable, adam, tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon);
        epoch_loss += batch_loss * static_cast<double>(end - at);
        ++batches;
      }
      // epoch_loss accumulated batch means times batch sizes: undo to a
      // plain mean over cohorts below.
    }

    MetricRecord rec;
    rec.stage = tc.stage;
    rec.epoch = epoch;
    if (tc.stage == TrainStage::CvaeOnly) {
      rec.loss = epoch_loss / std::max(1, batches);
      rec.recon = epoch_recon / std::max(1, batches);
      rec.kl = epoch_kl / std::max(1, batches);
    } else {
      rec.loss = epoch_loss / static_cast<double>(data.size());
    }
    log.push_back(rec);
  }
}

TrainReport progressive_train(std::span<const Cohort> data, const SceneGrid& grid,
                              ModelParams& params, const NspConfig& cfg,
                              std::span<const TrainConfig> schedule) {
  TrainReport report;
  for (const auto& tc : schedule) {
    train_stage(data, grid, params, cfg, tc, report.log);
  }
  return report;
}

}  // namespace nsp
