#include "nsp/evaluation.hpp"

#include "nsp/autodiff.hpp"
#include "nsp/forces.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <string>
#include <unordered_map>

namespace nsp {

namespace {

template <typename F>
void parallel_over(std::size_t n, int threads, F&& body) {
  const int usable = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (usable == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::future<void>> futures;
  futures.reserve(static_cast<std::size_t>(usable));
  std::atomic<std::size_t> next{0};
  for (int w = 0; w < usable; ++w) {
    futures.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    }));
  }
  for (auto& f : futures) f.get();
}

std::vector<Vec2> stored_future(const TrajectoryWindow& w) {
  std::vector<Vec2> out;
  out.reserve(kPredictLen);
  for (int t = kObservedLen; t < kWindowLen; ++t) out.push_back(w.frames[t].p);
  return out;
}

// Maps each rollout row back to its source window by agent_id.
std::vector<const TrajectoryWindow*> rows_to_windows(const RolloutResult& result,
                                                     std::span<const TrajectoryWindow> agents) {
  std::unordered_map<std::int64_t, const TrajectoryWindow*> by_id;
  for (const auto& w : agents) by_id[w.agent_id] = &w;
  std::vector<const TrajectoryWindow*> rows(result.agent_ids.size());
  for (std::size_t j = 0; j < rows.size(); ++j) rows[j] = by_id.at(result.agent_ids[j]);
  return rows;
}

std::vector<Vec2> predicted_positions(const std::vector<AgentState>& states) {
  std::vector<Vec2> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.p);
  return out;
}

// Indices of `agents` in ascending agent_id order; pins the goal-draw order.
std::vector<std::size_t> id_order(std::span<const TrajectoryWindow> agents) {
  std::vector<std::size_t> order(agents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return agents[a].agent_id < agents[b].agent_id;
  });
  return order;
}

}  // namespace

DisplacementErrors displacement_errors(std::span<const Vec2> pred, std::span<const Vec2> truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw ad::ShapeMismatch("displacement_errors: " + std::to_string(pred.size()) +
                            " predicted vs " + std::to_string(truth.size()) + " truth samples");
  }
  DisplacementErrors out;
  for (std::size_t t = 0; t < pred.size(); ++t) out.ade += (pred[t] - truth[t]).norm();
  out.ade /= static_cast<double>(pred.size());
  out.fde = (pred.back() - truth.back()).norm();
  return out;
}

DisplacementErrors min_of_k(std::span<const std::vector<Vec2>> samples,
                            std::span<const Vec2> truth) {
  if (samples.empty()) throw EmptySampleSet("min_of_k: no samples");
  DisplacementErrors best;
  best.ade = std::numeric_limits<double>::infinity();
  best.fde = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    const auto e = displacement_errors(s, truth);
    best.ade = std::min(best.ade, e.ade);
    best.fde = std::min(best.fde, e.fde);
  }
  return best;
}

DisplacementErrors mean_errors(std::span<const DisplacementErrors> per_agent) {
  if (per_agent.empty()) throw EmptySampleSet("mean_errors: no agents");
  DisplacementErrors out;
  for (const auto& e : per_agent) {
    out.ade += e.ade;
    out.fde += e.fde;
  }
  out.ade /= static_cast<double>(per_agent.size());
  out.fde /= static_cast<double>(per_agent.size());
  return out;
}

double collision_rate(std::span<const std::vector<Vec2>> tracks, const CollisionSpec& spec) {
  if (tracks.size() < 2) {
    throw TooFewAgents("collision_rate: need at least 2 agents, got " +
                       std::to_string(tracks.size()));
  }
  if (!(spec.radius > 0.0)) throw ConfigError("collision_rate: radius must be > 0");
  const std::size_t len = tracks.front().size();
  for (const auto& t : tracks) {
    if (t.size() != len) throw ad::ShapeMismatch("collision_rate: tracks differ in length");
  }
  if (len == 0) throw ad::ShapeMismatch("collision_rate: empty tracks");
  const int last = spec.last_frame < 0 ? static_cast<int>(len) - 1 : spec.last_frame;
  if (spec.first_frame < 0 || last >= static_cast<int>(len) || spec.first_frame > last) {
    throw ConfigError("collision_rate: frame range [" + std::to_string(spec.first_frame) + ", " +
                      std::to_string(last) + "] outside tracks of length " + std::to_string(len));
  }
  const double threshold = 2.0 * spec.radius;
  std::size_t colliding = 0;
  for (std::size_t a = 0; a < tracks.size(); ++a) {
    for (std::size_t b = a + 1; b < tracks.size(); ++b) {
      for (int t = spec.first_frame; t <= last; ++t) {
        if ((tracks[a][static_cast<std::size_t>(t)] - tracks[b][static_cast<std::size_t>(t)])
                .norm() < threshold) {
          ++colliding;
          break;
        }
      }
    }
  }
  const double pairs = 0.5 * static_cast<double>(tracks.size()) *
                       static_cast<double>(tracks.size() - 1);
  return static_cast<double>(colliding) / pairs;
}

namespace {

// Boundary segments, in tie-break order for cells equidistant to two edges.
enum Segment { Top = 0, Bottom = 1, Left = 2, Right = 3 };

int segment_of(int r, int c, int h, int w) {
  const int d[4] = {r, h - 1 - r, c, w - 1 - c};
  int best = 0;
  for (int s = 1; s < 4; ++s) {
    if (d[s] < d[best]) best = s;
  }
  return best;
}

}  // namespace

std::vector<ScenarioAgent> generate_scenario(const SceneGrid& grid, int n_agents,
                                             double speed_min, double speed_max,
                                             std::mt19937_64& rng) {
  if (grid.empty()) throw ConfigError("generate_scenario: empty grid");
  if (n_agents < 1) throw ConfigError("generate_scenario: n_agents must be >= 1");
  if (!(speed_min > 0.0) || !(speed_max >= speed_min)) {
    throw ConfigError("generate_scenario: need 0 < speed_min <= speed_max");
  }

  struct Cell {
    Vec2 center;
    int segment;
  };
  const int band = std::max(1, static_cast<int>(std::floor(0.1 * std::min(grid.height,
                                                                          grid.width))));
  std::vector<Cell> pool;
  std::vector<std::vector<Vec2>> by_segment(4);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const int edge = std::min(std::min(r, grid.height - 1 - r),
                                std::min(c, grid.width - 1 - c));
      if (edge >= band) continue;
      if (grid.at(r, c) != CellClass::Walkable) continue;
      const Vec2 center(static_cast<double>(c), static_cast<double>(r));
      const int seg = segment_of(r, c, grid.height, grid.width);
      pool.push_back({center, seg});
      by_segment[static_cast<std::size_t>(seg)].push_back(center);
    }
  }
  if (static_cast<int>(pool.size()) < n_agents) {
    throw InfeasibleScene("generate_scenario: " + std::to_string(pool.size()) +
                          " walkable boundary cells for " + std::to_string(n_agents) + " agents");
  }

  std::uniform_real_distribution<double> speed(speed_min, speed_max);
  std::vector<ScenarioAgent> out;
  out.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t at = pick(rng);
    const Cell start = pool[at];
    pool[at] = pool.back();
    pool.pop_back();

    std::vector<const Vec2*> goals;
    for (int s = 0; s < 4; ++s) {
      if (s == start.segment) continue;
      for (const auto& g : by_segment[static_cast<std::size_t>(s)]) goals.push_back(&g);
    }
    if (goals.empty()) {
      throw InfeasibleScene("generate_scenario: no walkable cells outside segment " +
                            std::to_string(start.segment));
    }
    std::uniform_int_distribution<std::size_t> pick_goal(0, goals.size() - 1);
    const Vec2 goal = *goals[pick_goal(rng)];

    ScenarioAgent agent;
    agent.state.p = start.center;
    agent.state.v = speed(rng) * (goal - start.center).normalized();
    agent.goal = goal;
    out.push_back(agent);
  }
  return out;
}

std::vector<Vec2> standard_sample_goals(const Vec2& true_goal, double sigma, int K,
                                        std::mt19937_64& rng) {
  if (K < 1) throw ConfigError("standard_sample_goals: K must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("standard_sample_goals: sigma must be >= 0");
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const double x = true_goal.x() + sigma * unit(rng);
    const double y = true_goal.y() + sigma * unit(rng);
    out.emplace_back(std::round(x), std::round(y));
  }
  return out;
}

std::vector<DisplacementErrors> eval_deterministic(std::span<const TrajectoryWindow> agents,
                                                   const SceneGrid& grid,
                                                   const ModelParams& params, const NspConfig& cfg,
                                                   std::span<const ObstacleTrack> obstacles,
                                                   int threads) {
  std::mt19937_64 unused{0};
  const auto result = rollout_window(agents, grid, params, cfg, RolloutMode::Deterministic,
                                     unused, {}, obstacles, threads);
  const auto rows = rows_to_windows(result, agents);
  std::vector<DisplacementErrors> out(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out[j] = displacement_errors(predicted_positions(result.predicted[j]), stored_future(*rows[j]));
  }
  return out;
}

std::vector<DisplacementErrors> eval_standard(std::span<const TrajectoryWindow> agents,
                                              const SceneGrid& grid, const ModelParams& params,
                                              const NspConfig& cfg, int K, std::mt19937_64& rng,
                                              std::span<const ObstacleTrack> obstacles,
                                              int threads) {
  if (K < 1) throw ConfigError("eval_standard: K must be >= 1");
  const auto order = id_order(agents);
  std::vector<TrajectoryWindow> variant(agents.begin(), agents.end());
  std::vector<DisplacementErrors> best(agents.size());
  for (auto& e : best) {
    e.ade = std::numeric_limits<double>::infinity();
    e.fde = std::numeric_limits<double>::infinity();
  }
  for (int k = 0; k < K; ++k) {
    for (const std::size_t i : order) {
      const Vec2 g = standard_sample_goals(agents[i].goal, cfg.sigma_goal, 1, rng).front();
      variant[i].goal = g;
      variant[i].frames.back().p = g;
    }
    const auto result = rollout_window(variant, grid, params, cfg, RolloutMode::Stochastic, rng,
                                       {}, obstacles, threads);
    const auto rows = rows_to_windows(result, agents);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto e =
          displacement_errors(predicted_positions(result.predicted[j]), stored_future(*rows[j]));
      const std::size_t slot = static_cast<std::size_t>(rows[j] - agents.data());
      best[slot].ade = std::min(best[slot].ade, e.ade);
      best[slot].fde = std::min(best[slot].fde, e.fde);
    }
  }
  std::vector<DisplacementErrors> out;
  out.reserve(best.size());
  for (const std::size_t i : order) out.push_back(best[i]);
  return out;
}

std::vector<DisplacementErrors> eval_ultra(std::span<const TrajectoryWindow> agents,
                                           const SceneGrid& grid, const ModelParams& params,
                                           const NspConfig& cfg, std::mt19937_64& rng,
                                           std::span<const ObstacleTrack> obstacles, int threads) {
  const auto result = rollout_window(agents, grid, params, cfg, RolloutMode::Ultra, rng, agents,
                                     obstacles, threads);
  const auto rows = rows_to_windows(result, agents);
  std::vector<DisplacementErrors> out(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out[j] = displacement_errors(predicted_positions(result.predicted[j]), stored_future(*rows[j]));
  }
  return out;
}

SimulationResult simulate_free(std::span<const ScenarioAgent> agents, const SceneGrid& grid,
                               const ModelParams& params, const NspConfig& cfg,
                               const SimulateOptions& opts) {
  cfg.validate();
  if (agents.empty()) throw ConfigError("simulate_free: no agents");
  if (!(opts.seconds > 0.0) || !(opts.fps > 0.0)) {
    throw ConfigError("simulate_free: seconds and fps must be > 0");
  }
  for (const auto& a : agents) {
    if (!a.state.finite() || !a.goal.allFinite()) {
      throw NonFiniteValue("simulate_free: non-finite agent state");
    }
  }
  const int steps = static_cast<int>(std::llround(opts.seconds * opts.fps));
  if (steps < 1) throw ConfigError("simulate_free: horizon shorter than one frame");

  NspConfig sim_cfg = cfg;
  sim_cfg.dt = 1.0 / opts.fps;

  ForceOptions force_opts;
  force_opts.raise_on_degenerate = false;
  if (opts.goal_only) {
    force_opts.enable_col = false;
    force_opts.enable_env = false;
  }

  const std::size_t n = agents.size();
  const int hidden = GoalNetwork::kHiddenDim;
  std::vector<AgentState> current(n);
  std::vector<Eigen::MatrixXd> lstm_h(n, Eigen::MatrixXd::Zero(hidden, 1));
  std::vector<Eigen::MatrixXd> lstm_c(n, Eigen::MatrixXd::Zero(hidden, 1));

  SimulationResult result;
  result.sim_dt = sim_cfg.dt;
  result.agent_ids.reserve(n);
  result.frames_by_agent.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    result.agent_ids.push_back(static_cast<std::int64_t>(i));
    current[i] = agents[i].state;
    result.frames_by_agent[i].reserve(static_cast<std::size_t>(steps) + 1);
    result.frames_by_agent[i].push_back(current[i]);
  }

  std::vector<Vec2> accel(n);
  for (int t = 0; t < steps; ++t) {
    // Synchronous: every force reads the states frozen at t.
    parallel_over(n, opts.threads, [&](std::size_t i) {
      ad::Tape tape;
      std::vector<AgentNode> nodes;
      nodes.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        nodes.push_back({tape.constant(current[j].p), tape.constant(current[j].v)});
      }
      auto st = params.goal_net.state_from(tape, lstm_h[i], lstm_c[i]);
      const auto fg = agent_force_graph(tape, nodes, i, tape.constant(agents[i].goal), grid,
                                        params, st, sim_cfg, t, steps, force_opts);
      lstm_h[i] = st.h.m();
      lstm_c[i] = st.c.m();
      accel[i] = Vec2(fg.accel.m()(0, 0), fg.accel.m()(1, 0));
    });
    for (std::size_t i = 0; i < n; ++i) {
      current[i] = semi_implicit_step(current[i], accel[i], Vec2(0.0, 0.0), sim_cfg.dt);
      if (!current[i].finite()) {
        throw NonFiniteValue("simulate_free: diverged at frame " + std::to_string(t + 1));
      }
      result.frames_by_agent[i].push_back(current[i]);
    }
  }
  return result;
}

std::vector<std::vector<Vec2>> subsample_positions(const SimulationResult& sim, int stride) {
  if (stride < 1) throw ConfigError("subsample_positions: stride must be >= 1");
  std::vector<std::vector<Vec2>> out;
  out.reserve(sim.frames_by_agent.size());
  for (const auto& track : sim.frames_by_agent) {
    std::vector<Vec2> pts;
    pts.reserve(track.size() / static_cast<std::size_t>(stride) + 1);
    for (std::size_t t = 0; t < track.size(); t += static_cast<std::size_t>(stride)) {
      pts.push_back(track[t].p);
    }
    out.push_back(std::move(pts));
  }
  return out;
}

}  // namespace nsp
