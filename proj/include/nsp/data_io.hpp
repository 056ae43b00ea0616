#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsp/model_params.hpp"
#include "nsp/rollout.hpp"

namespace nsp {

struct ParseError : Error {
  using Error::Error;
};
struct NonMonotoneFrames : Error {
  using Error::Error;
};
struct InvalidLabel : Error {
  using Error::Error;
};
struct DegenerateProjection : Error {
  using Error::Error;
};
struct CheckpointError : Error {
  using Error::Error;
};

// One agent's raw annotation stream; frame ids strictly increasing.
struct RawTrack {
  std::int64_t agent_id = 0;
  std::vector<std::int64_t> frame_ids;
  std::vector<Vec2> positions;
};

// --- trajectory files -------------------------------------------------------
// One record per line: frame_id<TAB>agent_id<TAB>x<TAB>y (spaces accepted).

// Groups rows by agent and sorts each track by frame. Tracks come back in
// ascending agent_id order. Duplicate (frame, agent) rows are rejected.
std::vector<RawTrack> load_trajectories(const std::string& path);

// Positions are printed with max_digits10 so a round trip is lossless.
void save_trajectories(const std::string& path, std::span<const RawTrack> tracks);

// Predicted steps of a rollout as tracks (frames start_frame + 8g ... + 19g),
// ready for save_trajectories.
std::vector<RawTrack> tracks_from_rollout(const RolloutResult& result, std::int64_t start_frame,
                                          std::int64_t frame_gap);

// --- windowing --------------------------------------------------------------

// Every length-20 slice at the given stride. Slices with an irregular frame
// cadence and tracks shorter than 20 emit nothing (short tracks stay useful
// as dynamic obstacles). Velocities follow states_from_positions(dt).
std::vector<TrajectoryWindow> window_split(std::span<const RawTrack> tracks, int stride, double dt);

// Windows grouped by start frame, obstacle tracks attached. A track overlapping
// a cohort's span without contributing a window to it becomes an ObstacleTrack
// covering its aligned prefix run. frame_gap is the dataset's uniform cadence.
std::vector<Cohort> build_cohorts(std::span<const TrajectoryWindow> windows,
                                  std::span<const RawTrack> tracks, std::int64_t frame_gap,
                                  double dt);

// --- coordinate transforms --------------------------------------------------

// Pixel -> world homogeneous map.
struct Homography {
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();

  void validate() const;  // ConfigError unless |det| > 1e-12
};

enum class ProjectDirection {
  PixelToWorld,
  WorldToPixel,
};

// Homogeneous multiply + dehomogenize; WorldToPixel applies the inverse.
Vec2 apply_homography(const Homography& h, const Vec2& point, ProjectDirection direction);

// --- scene grids ------------------------------------------------------------
// Line 1: "height width"; then height rows of width labels 0/1/2.

SceneGrid load_scene_grid(const std::string& path);

// --- checkpoints ------------------------------------------------------------
// Text manifest (name rows cols offset per tensor), then a raw block of
// little-endian 64-bit floats; offsets count elements from the block start.

void save_checkpoint(const std::string& path, ModelParams& params);

// Restores every model tensor by name; shape or coverage mismatch is a
// CheckpointError naming the offender.
void load_checkpoint(const std::string& path, ModelParams& params);

}  // namespace nsp
