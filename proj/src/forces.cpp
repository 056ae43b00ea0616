#include "nsp/forces.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace nsp {

using ad::Tape;
using ad::Value;

Vec2 desired_velocity(const Vec2& p, const Vec2& p_goal, int t, int T, double dt) {
  if (dt <= 0.0) throw ConfigError("desired_velocity: dt must be positive");
  if (t >= T) {
    throw TimeExhausted("desired_velocity: no time remains (t=" + std::to_string(t) +
                        ", T=" + std::to_string(T) + ")");
  }
  return (p_goal - p) / ((T - t) * dt);
}

Vec2 goal_force(double tau, const Vec2& v_des, const Vec2& v) {
  if (tau <= 0.0) throw NonPositiveTau("goal_force: tau = " + std::to_string(tau));
  return (v_des - v) / tau;
}

Vec2 collision_force(double k_nj, const Vec2& r_nj, double r_col) {
  const double dn = r_nj.norm();
  if (dn == 0.0) throw CoincidentAgents("collision_force: coincident agents");
  const Vec2 rhat = r_nj / dn;
  const double mag = k_nj * std::exp(dn * (-1.0 / r_col));
  return mag * rhat;
}

Vec2 env_force(double k_env, const Vec2& p, const std::optional<Vec2>& p_obs,
               const std::optional<Vec2>& p_wobs, double lambda_weak) {
  Vec2 f(0.0, 0.0);
  if (p_obs) {
    const Vec2 d = p - *p_obs;
    const double dn = d.norm();
    if (dn == 0.0) throw CoincidentObstacle("env_force: agent on the obstacle centroid");
    const Vec2 dhat = d / dn;
    f = f + (k_env / dn) * dhat;
  }
  if (p_wobs) {
    const Vec2 dw = p - *p_wobs;
    const double dnw = dw.norm();
    if (dnw == 0.0) throw CoincidentObstacle("env_force: agent on the weak-obstacle centroid");
    const Vec2 dwhat = dw / dnw;
    f = f + ((lambda_weak * k_env) / dnw) * dwhat;
  }
  return f;
}

namespace {

Vec2 as_vec2(Value v) {
  const Eigen::MatrixXd& m = v.m();
  return Vec2(m(0, 0), m(1, 0));
}

Value zero2(Tape& tape) {
  return tape.constant(Eigen::MatrixXd::Zero(2, 1));
}

}  // namespace

ForceGraph agent_force_graph(Tape& tape, std::span<const AgentNode> agents, std::size_t self_index,
                             Value goal, const SceneGrid& grid, const ModelParams& params,
                             GoalNetwork::State& goal_state, const NspConfig& cfg, int t, int T,
                             const ForceOptions& opts) {
  if (t >= T) {
    throw TimeExhausted("agent_force_graph: no time remains (t=" + std::to_string(t) +
                        ", T=" + std::to_string(T) + ")");
  }

  // Plain snapshot of every agent for the non-differentiable geometric gates.
  std::vector<AgentState> snapshot(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    snapshot[i].p = as_vec2(agents[i].p);
    snapshot[i].v = as_vec2(agents[i].v);
  }
  const AgentNode& self = agents[self_index];

  ForceGraph out;

  Value q = ad::concat(self.p, self.v);
  out.tau = goal_tau(tape, params.goal_net, goal_state, q, goal, cfg);
  if (out.tau.m()(0, 0) <= 0.0) {
    throw NonPositiveTau("agent_force_graph: tau = " + std::to_string(out.tau.m()(0, 0)));
  }

  const double horizon = (T - t) * cfg.dt;
  Value v_des = ad::sdiv(ad::sub(goal, self.p), tape.scalar_constant(horizon));
  out.f_goal = ad::sdiv(ad::sub(v_des, self.v), out.tau);

  Value f_col = zero2(tape);
  if (opts.enable_col) {
    for (std::size_t j : neighborhood(snapshot, self_index, cfg.omega, cfg.r_col)) {
      const double dn = (snapshot[self_index].p - snapshot[j].p).norm();
      if (dn == 0.0) {
        if (opts.raise_on_degenerate) {
          throw CoincidentAgents("agent_force_graph: coincident with a neighbor");
        }
        ++out.degenerate_terms;
        continue;
      }
      Value r = ad::sub(self.p, agents[j].p);
      Value n = ad::norm(r);
      Value rhat = ad::sdiv(r, n);
      Value e = ad::exp_(ad::scale(n, -1.0 / cfg.r_col));
      Value k = collision_k(tape, params.collision_net, q, ad::concat(agents[j].p, agents[j].v), cfg);
      f_col = ad::add(f_col, ad::smul(rhat, ad::smul(e, k)));
    }
  }
  out.f_col = f_col;

  Value f_env = zero2(tape);
  if (opts.enable_env && !grid.empty()) {
    const ViewField field = view_field(snapshot[self_index], cfg.r_env);
    if (field.valid) {
      const ObstacleCentroids cents = obstacle_centroids(grid, field);
      if (cents.obs || cents.wobs) {
        Value kv = tape.leaf(const_cast<ad::Tensor&>(params.k_env));
        if (cents.obs) {
          const double dn = (snapshot[self_index].p - *cents.obs).norm();
          if (dn == 0.0) {
            if (opts.raise_on_degenerate) {
              throw CoincidentObstacle("agent_force_graph: agent on the obstacle centroid");
            }
            ++out.degenerate_terms;
          } else {
            Value d = ad::sub(self.p, tape.constant(*cents.obs));
            Value n = ad::norm(d);
            f_env = ad::add(f_env, ad::smul(ad::sdiv(d, n), ad::sdiv(kv, n)));
          }
        }
        if (cents.wobs) {
          const double dn = (snapshot[self_index].p - *cents.wobs).norm();
          if (dn == 0.0) {
            if (opts.raise_on_degenerate) {
              throw CoincidentObstacle("agent_force_graph: agent on the weak-obstacle centroid");
            }
            ++out.degenerate_terms;
          } else {
            Value d = ad::sub(self.p, tape.constant(*cents.wobs));
            Value n = ad::norm(d);
            f_env = ad::add(f_env, ad::smul(ad::sdiv(d, n), ad::sdiv(ad::scale(kv, cfg.lambda_weak), n)));
          }
        }
      }
    }
  }
  out.f_env = f_env;

  out.accel = ad::add(ad::add(out.f_goal, out.f_col), out.f_env);
  return out;
}

ForceBreakdown net_acceleration(const AgentState& state, const Vec2& goal,
                                std::span<const AgentState> others, const SceneGrid& grid,
                                const ModelParams& params, GoalNetwork::State& goal_state,
                                Tape& tape, const NspConfig& cfg, int t, int T,
                                const ForceOptions& opts) {
  std::vector<AgentNode> nodes;
  nodes.reserve(others.size() + 1);
  nodes.push_back(AgentNode{tape.constant(state.p), tape.constant(state.v)});
  for (const AgentState& o : others) {
    nodes.push_back(AgentNode{tape.constant(o.p), tape.constant(o.v)});
  }
  const ForceGraph g =
      agent_force_graph(tape, nodes, 0, tape.constant(goal), grid, params, goal_state, cfg, t, T, opts);
  ForceBreakdown out;
  out.f_goal = as_vec2(g.f_goal);
  out.f_col = as_vec2(g.f_col);
  out.f_env = as_vec2(g.f_env);
  out.total = as_vec2(g.accel);
  return out;
}

}  // namespace nsp
