#pragma once

#include "nsp/model_params.hpp"
#include "nsp/rollout.hpp"
#include "nsp/types.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace nsp {

struct TooFewAgents : Error {
  using Error::Error;
};
struct EmptySampleSet : Error {
  using Error::Error;
};
struct InfeasibleScene : Error {
  using Error::Error;
};

struct DisplacementErrors {
  double ade = 0.0;
  double fde = 0.0;
};

// Pointwise L2 against ground truth: ade averages over the track, fde takes
// the final sample. Tracks must have equal nonzero length.
DisplacementErrors displacement_errors(std::span<const Vec2> pred, std::span<const Vec2> truth);

// Best-of-K reduction. ade and fde are minimized independently, so the
// reported pair may come from two different samples.
DisplacementErrors min_of_k(std::span<const std::vector<Vec2>> samples,
                            std::span<const Vec2> truth);

DisplacementErrors mean_errors(std::span<const DisplacementErrors> per_agent);

struct CollisionSpec {
  double radius = 15.0;  // disc radius per agent; a pair collides below 2r
  int first_frame = 0;   // inclusive index into the scored tracks
  int last_frame = -1;   // inclusive; -1 means the final frame
};

// Fraction of unordered pairs whose separation drops below 2r at any scored
// frame: M / (N(N-1)/2). Tracks must be frame-aligned and share one length.
double collision_rate(std::span<const std::vector<Vec2>> tracks, const CollisionSpec& spec);

struct ScenarioAgent {
  AgentState state;
  Vec2 goal{0.0, 0.0};
};

// Crossing scenario on a grid: agents start on distinct walkable cells inside
// the boundary band (10% of the smaller grid extent) and aim at a goal cell
// on a different boundary segment, with initial speed drawn uniformly from
// [speed_min, speed_max] along the goal direction.
std::vector<ScenarioAgent> generate_scenario(const SceneGrid& grid, int n_agents,
                                             double speed_min, double speed_max,
                                             std::mt19937_64& rng);

// K iid draws from an isotropic normal around the true goal, snapped to pixel
// centers (integer coordinates).
std::vector<Vec2> standard_sample_goals(const Vec2& true_goal, double sigma, int K,
                                        std::mt19937_64& rng);

// Prediction protocols. Each scores a cohort of windows against their own
// stored future and returns per-agent errors in ascending agent_id order.
std::vector<DisplacementErrors> eval_deterministic(std::span<const TrajectoryWindow> agents,
                                                   const SceneGrid& grid,
                                                   const ModelParams& params, const NspConfig& cfg,
                                                   std::span<const ObstacleTrack> obstacles = {},
                                                   int threads = 1);

// Standard sampling: K jointly drawn goal candidates, one stochastic rollout
// per candidate, best-of-K per agent. Goal draws precede the rollout's
// residual draws on the shared stream, both in ascending agent_id order.
std::vector<DisplacementErrors> eval_standard(std::span<const TrajectoryWindow> agents,
                                              const SceneGrid& grid, const ModelParams& params,
                                              const NspConfig& cfg, int K, std::mt19937_64& rng,
                                              std::span<const ObstacleTrack> obstacles = {},
                                              int threads = 1);

// Ultra sampling: a single rollout that picks the best of 20 residual draws
// per step against the stored future.
std::vector<DisplacementErrors> eval_ultra(std::span<const TrajectoryWindow> agents,
                                           const SceneGrid& grid, const ModelParams& params,
                                           const NspConfig& cfg, std::mt19937_64& rng,
                                           std::span<const ObstacleTrack> obstacles = {},
                                           int threads = 1);

struct SimulateOptions {
  double seconds = 30.0;
  double fps = 10.0;
  bool goal_only = false;  // ablation: drop collision and environment forces
  int threads = 1;
};

struct SimulationResult {
  std::vector<std::int64_t> agent_ids;                   // 0..n-1 in spawn order
  std::vector<std::vector<AgentState>> frames_by_agent;  // initial state + one per step
  double sim_dt = 0.0;
};

// Free-running deterministic simulation: no observation window, the goal
// network starts cold and ingests states as they are produced. The arrival
// horizon counts down to a floor of one step so finished agents hold station
// at their goals.
SimulationResult simulate_free(std::span<const ScenarioAgent> agents, const SceneGrid& grid,
                               const ModelParams& params, const NspConfig& cfg,
                               const SimulateOptions& opts);

// Every stride-th frame of each track (frame 0 included), as positions.
std::vector<std::vector<Vec2>> subsample_positions(const SimulationResult& sim, int stride);

}  // namespace nsp
