#include "nsp/rollout.hpp"

#include "nsp/cvae.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace nsp {

namespace {

constexpr int kFirstStep = kObservedLen - 1;  // 7: last observed frame feeds the first step
constexpr int kLastFrame = kWindowLen - 1;    // 19

// Canonical processing order: ascending agent_id. Everything downstream
// (neighbor spans, RNG draws, outputs) follows it, which is what makes the
// rollout invariant to the caller's ordering.
std::vector<std::size_t> canonical_order(std::span<const TrajectoryWindow> agents) {
  std::vector<std::size_t> order(agents.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return agents[a].agent_id < agents[b].agent_id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (agents[order[i - 1]].agent_id == agents[order[i]].agent_id) {
      throw DuplicateAgent("agent " + std::to_string(agents[order[i]].agent_id) +
                           " appears twice in the cohort");
    }
  }
  return order;
}

void check_cohort(std::span<const TrajectoryWindow> agents, const NspConfig& cfg) {
  cfg.validate();
  if (agents.empty()) throw Error("rollout needs at least one agent");
  for (const auto& w : agents) validate_window(w);
  for (const auto& w : agents) {
    if (w.start_frame != agents.front().start_frame) {
      throw Error("cohort windows disagree on start_frame");
    }
  }
}

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

}  // namespace

AgentState semi_implicit_step(const AgentState& state, const Vec2& accel, const Vec2& alpha,
                              double dt) {
  if (!(dt > 0.0)) throw ConfigError("semi_implicit_step: dt must be > 0");
  if (!state.finite() || !accel.allFinite() || !alpha.allFinite()) {
    throw NonFiniteInput("semi_implicit_step: non-finite input");
  }
  AgentState out;
  out.v = state.v + dt * accel;
  out.p = state.p + dt * out.v + alpha;
  return out;
}

RolloutResult rollout_window(std::span<const TrajectoryWindow> agents, const SceneGrid& grid,
                             const ModelParams& params, const NspConfig& cfg, RolloutMode mode,
                             std::mt19937_64& rng, std::span<const TrajectoryWindow> oracle,
                             std::span<const ObstacleTrack> obstacles, int threads) {
  check_cohort(agents, cfg);
  const auto order = canonical_order(agents);
  const std::size_t n = order.size();

  // Ultra mode scores candidates against ground truth, which must be present
  // for every agent in the cohort.
  std::vector<const TrajectoryWindow*> truth(n, nullptr);
  if (mode == RolloutMode::Ultra) {
    std::unordered_map<std::int64_t, const TrajectoryWindow*> by_id;
    for (const auto& w : oracle) {
      validate_window(w);
      by_id[w.agent_id] = &w;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto it = by_id.find(agents[order[i]].agent_id);
      if (it == by_id.end()) {
        throw MissingOracle("ultra mode: no ground-truth window for agent " +
                            std::to_string(agents[order[i]].agent_id));
      }
      truth[i] = it->second;
    }
  }

  RolloutResult result;
  result.agent_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) result.agent_ids.push_back(agents[order[i]].agent_id);
  result.predicted.assign(n, {});
  for (auto& v : result.predicted) v.reserve(kPredictLen);

  const auto& goal_net = params.goal_net;
  const int hidden = GoalNetwork::kHiddenDim;

  std::vector<AgentState> current(n);
  std::vector<Eigen::MatrixXd> lstm_h(n, Eigen::MatrixXd::Zero(hidden, 1));
  std::vector<Eigen::MatrixXd> lstm_c(n, Eigen::MatrixXd::Zero(hidden, 1));
  std::vector<std::vector<Vec2>> history(n);  // grows by one position per step
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = agents[order[i]];
    current[i] = w.frames[kFirstStep];
    for (int t = 0; t < kObservedLen; ++t) history[i].push_back(w.frames[t].p);
  }

  // Warm-up: frames 0..6 advance the LSTM; frame 7 is consumed by the first
  // force step below, completing the 8 observed frames.
  parallel_over(n, threads, [&](std::size_t i) {
    for (int t = 0; t < kFirstStep; ++t) {
      ad::Tape tape;
      auto st = goal_net.state_from(tape, lstm_h[i], lstm_c[i]);
      goal_ingest(tape, goal_net, st, state_input(tape, agents[order[i]].frames[t]));
      lstm_h[i] = st.h.m();
      lstm_c[i] = st.c.m();
    }
  });
  result.observed_frames_consumed = kFirstStep;

  ForceOptions opts;
  opts.raise_on_degenerate = false;

  std::vector<Vec2> accel(n);
  std::vector<ForceBreakdown> step_forces(n);
  std::vector<int> degenerate(n, 0);

  for (int t = kFirstStep; t < kLastFrame; ++t) {
    // Synchronous: every force reads the states frozen at t.
    parallel_over(n, threads, [&](std::size_t i) {
      ad::Tape tape;
      std::vector<AgentNode> nodes;
      nodes.reserve(n + obstacles.size());
      for (std::size_t j = 0; j < n; ++j) {
        nodes.push_back({tape.constant(current[j].p), tape.constant(current[j].v)});
      }
      for (const auto& ob : obstacles) {
        if (!ob.covers(t)) continue;
        nodes.push_back({tape.constant(ob.at(t).p), tape.constant(ob.at(t).v)});
      }
      auto st = goal_net.state_from(tape, lstm_h[i], lstm_c[i]);
      auto fg = agent_force_graph(tape, nodes, i, tape.constant(agents[order[i]].goal), grid,
                                  params, st, cfg, t, kLastFrame, opts);
      lstm_h[i] = st.h.m();
      lstm_c[i] = st.c.m();
      accel[i] = Vec2(fg.accel.m()(0, 0), fg.accel.m()(1, 0));
      step_forces[i].f_goal = Vec2(fg.f_goal.m()(0, 0), fg.f_goal.m()(1, 0));
      step_forces[i].f_col = Vec2(fg.f_col.m()(0, 0), fg.f_col.m()(1, 0));
      step_forces[i].f_env = Vec2(fg.f_env.m()(0, 0), fg.f_env.m()(1, 0));
      step_forces[i].total = accel[i];
      degenerate[i] += fg.degenerate_terms;
    });
    if (t == kFirstStep) result.observed_frames_consumed += 1;

    // Residual draws are serial in canonical order so the stream is
    // independent of thread count.
    for (std::size_t i = 0; i < n; ++i) {
      Vec2 alpha(0.0, 0.0);
      const std::span<const Vec2> past(history[i].data() + history[i].size() - kObservedLen,
                                       static_cast<std::size_t>(kObservedLen));
      if (mode == RolloutMode::Stochastic) {
        alpha = cvae_sample(params.cvae, past, cfg, rng);
      } else if (mode == RolloutMode::Ultra) {
        const AgentState base = semi_implicit_step(current[i], accel[i], Vec2(0.0, 0.0), cfg.dt);
        const Vec2 target = truth[i]->frames[static_cast<std::size_t>(t) + 1].p;
        double best = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 20; ++s) {
          const Vec2 cand = cvae_sample(params.cvae, past, cfg, rng);
          const double d = (base.p + cand - target).norm();
          if (d < best) {
            best = d;
            alpha = cand;
          }
        }
      }
      current[i] = semi_implicit_step(current[i], accel[i], alpha, cfg.dt);
      history[i].push_back(current[i].p);
      result.predicted[i].push_back(current[i]);
    }

    StepBreakdown log;
    log.frame = t + 1;
    log.per_agent = step_forces;
    result.breakdown.push_back(std::move(log));
  }

  result.degenerate_terms = std::accumulate(degenerate.begin(), degenerate.end(), 0);
  return result;
}

GraphRollout graph_rollout(ad::Tape& tape, std::span<const TrajectoryWindow> agents,
                           const SceneGrid& grid, const ModelParams& params, const NspConfig& cfg,
                           const ForceOptions& opts, std::span<const ObstacleTrack> obstacles) {
  check_cohort(agents, cfg);
  const auto order = canonical_order(agents);
  const std::size_t n = order.size();

  GraphRollout out;
  out.agent_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.agent_ids.push_back(agents[order[i]].agent_id);
  out.predicted_p.assign(n, {});

  const auto& goal_net = params.goal_net;
  std::vector<GoalNetwork::State> states;
  states.reserve(n);
  std::vector<AgentNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = agents[order[i]];
    states.push_back(goal_net.initial_state(tape));
    for (int t = 0; t < kFirstStep; ++t) {
      goal_ingest(tape, goal_net, states[i], state_input(tape, w.frames[t]));
    }
    nodes[i] = AgentNode{tape.constant(w.frames[kFirstStep].p), tape.constant(w.frames[kFirstStep].v)};
  }
  out.observed_frames_consumed = kFirstStep;

  const ad::Value zero2 = tape.constant(Vec2(0.0, 0.0));

  for (int t = kFirstStep; t < kLastFrame; ++t) {
    // Same synchronous discipline as the plain engine: all accelerations are
    // built against the step-t nodes before any node advances.
    std::vector<ad::Value> accels(n);
    std::vector<AgentNode> scene = nodes;
    for (const auto& ob : obstacles) {
      if (!ob.covers(t)) continue;
      scene.push_back({tape.constant(ob.at(t).p), tape.constant(ob.at(t).v)});
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto fg = agent_force_graph(tape, scene, i, tape.constant(agents[order[i]].goal), grid,
                                  params, states[i], cfg, t, kLastFrame, opts);
      accels[i] = fg.accel;
      out.degenerate_terms += fg.degenerate_terms;
    }
    if (t == kFirstStep) out.observed_frames_consumed += 1;
    for (std::size_t i = 0; i < n; ++i) {
      ad::Value vp = ad::add(nodes[i].v, ad::scale(accels[i], cfg.dt));
      ad::Value pp = ad::add(ad::add(nodes[i].p, ad::scale(vp, cfg.dt)), zero2);
      nodes[i] = AgentNode{pp, vp};
      out.predicted_p[i].push_back(pp);
    }
  }
  return out;
}

}  // namespace nsp
