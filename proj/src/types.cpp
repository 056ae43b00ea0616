#include "nsp/types.hpp"

namespace nsp {

void NspConfig::validate() const {
  if (!(a_tau > 0.0)) throw ConfigError("a_tau must be > 0");
  if (!(a_k > 0.0)) throw ConfigError("a_k must be > 0");
  if (!(r_col > 0.0)) throw ConfigError("r_col must be > 0");
  if (!(r_env > 0.0)) throw ConfigError("r_env must be > 0");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(omega > 0.0 && omega < M_PI)) throw ConfigError("omega must lie in (0, pi)");
  if (!(sigma_goal > 0.0)) throw ConfigError("sigma_goal must be > 0");
  if (!(sigma_latent > 0.0)) throw ConfigError("sigma_latent must be > 0");
  if (!(lambda_weak >= 0.0 && lambda_weak <= 1.0)) throw ConfigError("lambda_weak must lie in [0, 1]");
  if (!(cvae_scale > 0.0)) throw ConfigError("cvae_scale must be > 0");
}

void validate_window(const TrajectoryWindow& w) {
  if (static_cast<int>(w.frames.size()) != kWindowLen) {
    throw WrongFrameCount("window has " + std::to_string(w.frames.size()) + " frames, expected " +
                          std::to_string(kWindowLen));
  }
  if (w.observed_len != kObservedLen) {
    throw WrongFrameCount("observed_len is " + std::to_string(w.observed_len) + ", expected " +
                          std::to_string(kObservedLen));
  }
  for (std::size_t i = 0; i < w.frames.size(); ++i) {
    if (!w.frames[i].finite()) {
      throw NonFiniteValue("non-finite state at frame " + std::to_string(i) + " of agent " +
                           std::to_string(w.agent_id));
    }
  }
  if (!w.goal.allFinite()) {
    throw NonFiniteValue("non-finite goal for agent " + std::to_string(w.agent_id));
  }
  if (w.goal != w.frames.back().p) {
    throw GoalMismatch("goal does not equal the final frame position for agent " + std::to_string(w.agent_id));
  }
}

std::vector<AgentState> states_from_positions(const std::vector<Vec2>& positions, double dt) {
  std::vector<AgentState> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out[i].p = positions[i];
    if (positions.size() < 2) {
      out[i].v = Vec2::Zero();
    } else if (i == 0) {
      out[i].v = (positions[1] - positions[0]) / dt;
    } else {
      out[i].v = (positions[i] - positions[i - 1]) / dt;
    }
  }
  return out;
}

}  // namespace nsp
