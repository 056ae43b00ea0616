#pragma once

#include "nsp/cvae.hpp"
#include "nsp/rollout.hpp"

#include <span>
#include <vector>

namespace nsp {

enum class TrainStage {
  GoalOnly,      // stage 1: Goal-Network on l_traj, repulsive terms off
  AddRepulsion,  // stage 2: Collision-Network + k_env on l_traj, goal net frozen
  CvaeOnly,      // stage 3: CVAE on l_cvae, all force parameters frozen
};

struct TrainConfig {
  TrainStage stage = TrainStage::GoalOnly;
  double learning_rate = 1e-4;  // stage 3 default drops to 1e-5
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 10;
  int batch_size = 1;  // cohorts per optimizer step
  std::uint64_t seed = 0;
  double k_env_init = 1.0;  // applied when AddRepulsion starts

  void validate() const;
};

// mean over agents and predicted steps of |p - p_bar|^2 (pixels^2).
ad::Value loss_traj(ad::Tape& tape, const GraphRollout& pred,
                    std::span<const TrajectoryWindow> truth);
double loss_traj(const RolloutResult& pred, std::span<const TrajectoryWindow> truth);

// One teacher-forced residual sample: the gap between ground truth and the
// deterministic one-step prediction, with the history that conditioned it.
// Both already multiplied by cvae_scale.
struct ResidualSample {
  Eigen::MatrixXd alpha;    // 2x1
  Eigen::MatrixXd history;  // 16x1
};

// Single steps along the ground-truth trajectory under the frozen force
// model: 12 samples per cohort agent.
std::vector<ResidualSample> teacher_forced_residuals(const Cohort& cohort, const SceneGrid& grid,
                                                     const ModelParams& params,
                                                     const NspConfig& cfg);

// mean reconstruction error + lambda_kl * mean KL over a batch.
struct CvaeLoss {
  ad::Value total;
  double recon = 0.0;  // batch means of the two parts, for logging
  double kl = 0.0;
};
CvaeLoss loss_cvae(ad::Tape& tape, std::span<const CvaeForward> forward,
                   std::span<const ResidualSample> batch, double lambda_kl);

// Adam with bias correction. Gradients are read from each tensor's grad
// field; any tensor named "k_env" is clamped to >= 0 after the update.
struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long step = 0;
};
void adam_update(std::span<ad::Tensor* const> params, AdamState& state, double lr, double beta1,
                 double beta2, double epsilon);

struct MetricRecord {
  TrainStage stage = TrainStage::GoalOnly;
  int epoch = 0;
  double loss = 0.0;
  double recon = 0.0;  // stage 3 components; zero otherwise
  double kl = 0.0;
};

struct TrainReport {
  std::vector<MetricRecord> log;
};

// Runs one stage in place. Appends one record per epoch.
void train_stage(std::span<const Cohort> data, const SceneGrid& grid, ModelParams& params,
                 const NspConfig& cfg, const TrainConfig& tc, std::vector<MetricRecord>& log);

// The progressive schedule: each entry is run in order against the same
// parameter set; a standard run passes {GoalOnly, AddRepulsion, CvaeOnly}.
TrainReport progressive_train(std::span<const Cohort> data, const SceneGrid& grid,
                              ModelParams& params, const NspConfig& cfg,
                              std::span<const TrainConfig> schedule);

}  // namespace nsp
