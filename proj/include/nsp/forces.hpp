#pragma once

#include "nsp/geometry.hpp"
#include "nsp/model_params.hpp"
#include "nsp/types.hpp"

#include <optional>
#include <span>

namespace nsp {

struct TimeExhausted : Error {
  using Error::Error;
};
struct NonPositiveTau : Error {
  using Error::Error;
};
struct CoincidentAgents : Error {
  using Error::Error;
};
struct CoincidentObstacle : Error {
  using Error::Error;
};

struct ForceBreakdown {
  Vec2 f_goal{0.0, 0.0};
  Vec2 f_col{0.0, 0.0};
  Vec2 f_env{0.0, 0.0};
  Vec2 total{0.0, 0.0};
};

// --- closed-form force terms ----------------------------------------------

// (p_goal - p) / ((T - t) dt): reaches the goal in exactly the remaining time.
Vec2 desired_velocity(const Vec2& p, const Vec2& p_goal, int t, int T, double dt);

// (v_des - v) / tau
Vec2 goal_force(double tau, const Vec2& v_des, const Vec2& v);

// k_nj exp(-|r|/r_col) r_hat, the negative gradient of the repulsive
// potential U = r_col k_nj exp(-|r|/r_col); r points from neighbor to self.
Vec2 collision_force(double k_nj, const Vec2& r_nj, double r_col);

// (k_env/|d|) d_hat + (lambda_weak k_env/|d_w|) d_w_hat for d = p - centroid;
// absent centroids contribute nothing.
Vec2 env_force(double k_env, const Vec2& p, const std::optional<Vec2>& p_obs,
               const std::optional<Vec2>& p_wobs, double lambda_weak);

// --- graph-side composition ------------------------------------------------

// One agent's position/velocity as graph nodes; constants at inference time,
// integrator outputs during training.
struct AgentNode {
  ad::Value p;
  ad::Value v;
};

struct ForceOptions {
  bool enable_col = true;        // stage-1 training runs with both repulsive
  bool enable_env = true;        // terms off
  bool raise_on_degenerate = true;  // false: drop the term and count instead
};

struct ForceGraph {
  ad::Value tau;
  ad::Value f_goal;
  ad::Value f_col;
  ad::Value f_env;
  ad::Value accel;  // f_goal + f_col + f_env
  int degenerate_terms = 0;
};

// Builds one agent's acceleration on the tape: tau and per-neighbor k from
// the networks, sector/view-field gating from the current plain values.
// Advances goal_state. Disabled or absent force terms appear as exact zero
// constants so the breakdown shape never changes.
ForceGraph agent_force_graph(ad::Tape& tape, std::span<const AgentNode> agents, std::size_t self_index,
                             ad::Value goal, const SceneGrid& grid, const ModelParams& params,
                             GoalNetwork::State& goal_state, const NspConfig& cfg, int t, int T,
                             const ForceOptions& opts = {});

// Plain-value wrapper over agent_force_graph for single-state evaluation:
// `others` holds every other agent in the scene (sector gating is applied
// inside). Network evaluation happens on the supplied tape and advances
// goal_state; degenerate geometry raises.
ForceBreakdown net_acceleration(const AgentState& state, const Vec2& goal,
                                std::span<const AgentState> others, const SceneGrid& grid,
                                const ModelParams& params, GoalNetwork::State& goal_state,
                                ad::Tape& tape, const NspConfig& cfg, int t, int T,
                                const ForceOptions& opts = {});

}  // namespace nsp
