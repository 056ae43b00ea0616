#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsp {

using Vec2 = Eigen::Vector2d;

// 20-frame samples: 8 observed, 12 predicted.
inline constexpr int kWindowLen = 20;
inline constexpr int kObservedLen = 8;
inline constexpr int kPredictLen = kWindowLen - kObservedLen;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Position + velocity of one agent at one time step.
struct AgentState {
  Vec2 p{0.0, 0.0};
  Vec2 v{0.0, 0.0};

  bool finite() const {
    return p.allFinite() && v.allFinite();
  }
};

// One training/evaluation sample: 20 uniformly spaced frames of a single
// agent, the first 8 observed, plus the goal (the final frame's position).
struct TrajectoryWindow {
  std::int64_t agent_id = 0;
  std::int64_t start_frame = 0;
  std::vector<AgentState> frames;
  int observed_len = kObservedLen;
  Vec2 goal{0.0, 0.0};
};

enum class CellClass : std::uint8_t {
  Walkable = 0,
  Unwalkable = 1,
  WeakObstacle = 2,
};

// Per-pixel class grid. Cell (row, col) is centered at (x=col, y=row).
struct SceneGrid {
  int height = 0;
  int width = 0;
  std::vector<CellClass> cells;

  CellClass at(int row, int col) const { return cells[static_cast<std::size_t>(row) * width + col]; }
  CellClass& at(int row, int col) { return cells[static_cast<std::size_t>(row) * width + col]; }
  bool in_bounds(int row, int col) const { return row >= 0 && row < height && col >= 0 && col < width; }
  bool empty() const { return cells.empty(); }
};

// All scalar hyper-parameters. Defaults are the SDD configuration.
struct NspConfig {
  double a_tau = 1.0;
  double b_tau = 0.4;
  double a_k = 100.0;
  double b_k = 0.0;
  double omega = M_PI / 3.0;     // sector half-angle, radians
  double r_col = 100.0;          // neighborhood radius, pixels
  double r_env = 50.0;           // view-field side length, pixels
  double sigma_goal = 4.0;       // goal-sampling std, pixels
  double sigma_latent = 1.3;     // test-time latent std
  double lambda_weak = 0.2;      // weak-obstacle force weight
  double lambda_kl = 1.0;        // KL loss weight
  double dt = 0.4;               // seconds per frame
  double cvae_scale = 0.005;     // CVAE data scaling factor

  void validate() const;
};

struct ConfigError : Error {
  using Error::Error;
};

struct WrongFrameCount : Error {
  using Error::Error;
};
struct NonFiniteValue : Error {
  using Error::Error;
};
struct GoalMismatch : Error {
  using Error::Error;
};

// Throws the violated-invariant error; returns normally iff the window is valid.
void validate_window(const TrajectoryWindow& w);

// Finite-difference velocities: forward difference for the first sample,
// backward difference for the rest (only causally available data).
std::vector<AgentState> states_from_positions(const std::vector<Vec2>& positions, double dt);

}  // namespace nsp
