#include "nsp/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace nsp {

bool ViewField::contains(const Vec2& x) const {
  if (!valid) return false;
  // Edge directions are the heading rotated by +/-45 degrees; the square is
  // the box [0, side]^2 in that frame.
  const double c = std::sqrt(0.5);
  const Vec2 e1(c * (heading.x() - heading.y()), c * (heading.x() + heading.y()));
  const Vec2 e2(c * (heading.x() + heading.y()), c * (heading.y() - heading.x()));
  const Vec2 u = x - origin;
  const double a = u.dot(e1);
  const double b = u.dot(e2);
  // Roundoff slack so the far corner, reached through the rotation above,
  // still counts as inside.
  const double tol = 1e-9 * std::max(1.0, side);
  return a >= -tol && a <= side + tol && b >= -tol && b <= side + tol;
}

std::vector<std::size_t> neighborhood(std::span<const AgentState> agents, std::size_t self_index,
                                      double omega, double r_col) {
  std::vector<std::size_t> result;
  const AgentState& self = agents[self_index];
  const double speed = self.v.norm();
  if (speed == 0.0) return result;  // sector undefined for a stationary agent
  const Vec2 dir = self.v / speed;
  for (std::size_t j = 0; j < agents.size(); ++j) {
    if (j == self_index) continue;
    const Vec2 r = agents[j].p - self.p;
    const double d = r.norm();
    if (d > r_col) continue;
    if (d == 0.0) {
      result.push_back(j);  // coincident: bearing undefined, distance qualifies
      continue;
    }
    const double cosang = std::clamp(dir.dot(r / d), -1.0, 1.0);
    if (std::acos(cosang) <= omega) result.push_back(j);
  }
  return result;
}

ViewField view_field(const AgentState& self, double r_env) {
  ViewField f;
  f.origin = self.p;
  f.side = r_env;
  const double speed = self.v.norm();
  if (speed == 0.0) return f;  // invalid: no environment force
  f.heading = self.v / speed;
  f.valid = true;
  return f;
}

ObstacleCentroids obstacle_centroids(const SceneGrid& grid, const ViewField& field) {
  ObstacleCentroids out;
  if (!field.valid || grid.empty()) return out;

  // The square fits inside the disc of radius side*sqrt(2) around the origin.
  const double reach = field.side * std::sqrt(2.0);
  const int r0 = std::max(0, static_cast<int>(std::floor(field.origin.y() - reach)));
  const int r1 = std::min(grid.height - 1, static_cast<int>(std::ceil(field.origin.y() + reach)));
  const int c0 = std::max(0, static_cast<int>(std::floor(field.origin.x() - reach)));
  const int c1 = std::min(grid.width - 1, static_cast<int>(std::ceil(field.origin.x() + reach)));

  Vec2 obs_sum = Vec2::Zero();
  Vec2 wobs_sum = Vec2::Zero();
  std::size_t obs_n = 0;
  std::size_t wobs_n = 0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const CellClass cls = grid.at(r, c);
      if (cls == CellClass::Walkable) continue;
      const Vec2 center(static_cast<double>(c), static_cast<double>(r));
      if (!field.contains(center)) continue;
      if (cls == CellClass::Unwalkable) {
        obs_sum += center;
        ++obs_n;
      } else {
        wobs_sum += center;
        ++wobs_n;
      }
    }
  }
  if (obs_n > 0) out.obs = obs_sum / static_cast<double>(obs_n);
  if (wobs_n > 0) out.wobs = wobs_sum / static_cast<double>(wobs_n);
  return out;
}

}  // namespace nsp
