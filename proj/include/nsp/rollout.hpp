#pragma once

#include "nsp/forces.hpp"
#include "nsp/model_params.hpp"
#include "nsp/types.hpp"

#include <random>
#include <span>
#include <vector>

namespace nsp {

struct NonFiniteInput : Error {
  using Error::Error;
};
struct MissingOracle : Error {
  using Error::Error;
};
struct DuplicateAgent : Error {
  using Error::Error;
};

// v' = v + dt a;  p' = p + dt v' + alpha.  alpha perturbs the stored position
// only; the velocity carried to the next step is the integrator's.
AgentState semi_implicit_step(const AgentState& state, const Vec2& accel, const Vec2& alpha,
                              double dt);

enum class RolloutMode {
  Deterministic,  // alpha = 0
  Stochastic,     // one CVAE draw per agent-step
  Ultra,          // 20 CVAE draws per agent-step, closest to the oracle kept
};

// Ground-truth positions of an agent that shares the scene but is not being
// predicted (a shorter track). Feeds neighborhood gating only; never stepped.
// first_frame indexes into the window (0..19).
struct ObstacleTrack {
  std::int64_t agent_id = -1;
  int first_frame = 0;
  std::vector<AgentState> states;

  bool covers(int t) const {
    return t >= first_frame && t < first_frame + static_cast<int>(states.size());
  }
  const AgentState& at(int t) const { return states[static_cast<std::size_t>(t - first_frame)]; }
};

// One rollout unit: the windows predicted together plus the shorter tracks
// sharing their scene.
struct Cohort {
  std::vector<TrajectoryWindow> windows;
  std::vector<ObstacleTrack> obstacles;
};

struct StepBreakdown {
  int frame = 0;                          // window-relative frame this step produced (8..19)
  std::vector<ForceBreakdown> per_agent;  // canonical agent order
};

struct RolloutResult {
  std::vector<std::int64_t> agent_ids;             // ascending; all outputs use this order
  std::vector<std::vector<AgentState>> predicted;  // [agent][kPredictLen]
  std::vector<StepBreakdown> breakdown;            // kPredictLen entries, aligned
  int degenerate_terms = 0;
  int observed_frames_consumed = 0;  // LSTM frames per agent before the first prediction
};

// Rolls one window forward: LSTM warm-up over the 8 observed frames, then 12
// synchronous force steps. Windows are read for frames 0..7 and the goal; in
// ultra mode `oracle` supplies ground-truth windows (matched by agent_id)
// whose frames 8..19 the candidate draws are scored against. Degenerate force
// geometry is dropped term-by-term and counted, never raised.
RolloutResult rollout_window(std::span<const TrajectoryWindow> agents, const SceneGrid& grid,
                             const ModelParams& params, const NspConfig& cfg, RolloutMode mode,
                             std::mt19937_64& rng, std::span<const TrajectoryWindow> oracle = {},
                             std::span<const ObstacleTrack> obstacles = {}, int threads = 1);

// Deterministic rollout recorded on a caller-owned tape, for loss building.
// Forward numbers are identical to rollout_window in deterministic mode; the
// predicted positions stay differentiable back to every network parameter.
struct GraphRollout {
  std::vector<std::int64_t> agent_ids;              // ascending
  std::vector<std::vector<ad::Value>> predicted_p;  // [agent][kPredictLen]
  int degenerate_terms = 0;
  int observed_frames_consumed = 0;
};

GraphRollout graph_rollout(ad::Tape& tape, std::span<const TrajectoryWindow> agents,
                           const SceneGrid& grid, const ModelParams& params, const NspConfig& cfg,
                           const ForceOptions& opts = {.raise_on_degenerate = false},
                           std::span<const ObstacleTrack> obstacles = {});

}  // namespace nsp
