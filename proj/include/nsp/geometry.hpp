#pragma once

#include "nsp/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace nsp {

// Forward square with one corner at the agent; the current velocity runs
// along its diagonal. Invalid when the agent is stationary.
struct ViewField {
  Vec2 origin{0.0, 0.0};
  Vec2 heading{0.0, 0.0};  // unit velocity direction
  double side = 0.0;
  bool valid = false;

  bool contains(const Vec2& x) const;
};

// Indices j of agents[..] within distance r_col of agents[self_index] whose
// bearing deviates from the velocity direction by at most omega (half-angle).
// A stationary agent has no sector and gets an empty set. The agent itself is
// never included.
std::vector<std::size_t> neighborhood(std::span<const AgentState> agents, std::size_t self_index,
                                      double omega, double r_col);

ViewField view_field(const AgentState& self, double r_env);

struct ObstacleCentroids {
  std::optional<Vec2> obs;   // mean of Unwalkable cell centers in the field
  std::optional<Vec2> wobs;  // mean of WeakObstacle cell centers in the field
};

ObstacleCentroids obstacle_centroids(const SceneGrid& grid, const ViewField& field);

}  // namespace nsp
