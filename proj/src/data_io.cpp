#include "nsp/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace nsp {

namespace {

// Splits on runs of blanks; empty fields never appear.
std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const std::string& path, int line_no, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": bad " + what + " '" +
                     std::string(text) + "'");
  }
  return value;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  return in;
}

}  // namespace

std::vector<RawTrack> load_trajectories(const std::string& path) {
  auto in = open_or_throw(path);
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, Vec2>>> by_agent;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = fields_of(line);
    if (f.empty()) continue;
    if (f.size() != 4) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                       std::to_string(f.size()));
    }
    const auto frame = parse_number<std::int64_t>(f[0], path, line_no, "frame id");
    const auto agent = parse_number<std::int64_t>(f[1], path, line_no, "agent id");
    const auto x = parse_number<double>(f[2], path, line_no, "x");
    const auto y = parse_number<double>(f[3], path, line_no, "y");
    by_agent[agent].emplace_back(frame, Vec2(x, y));
  }

  std::vector<RawTrack> tracks;
  tracks.reserve(by_agent.size());
  for (auto& [agent, records] : by_agent) {
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    RawTrack track;
    track.agent_id = agent;
    for (const auto& [frame, p] : records) {
      if (!track.frame_ids.empty() && frame == track.frame_ids.back()) {
        throw NonMonotoneFrames(path + ": agent " + std::to_string(agent) +
                                " repeats frame " + std::to_string(frame));
      }
      track.frame_ids.push_back(frame);
      track.positions.push_back(p);
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

void save_trajectories(const std::string& path, std::span<const RawTrack> tracks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  char buf[96];
  for (const auto& track : tracks) {
    for (std::size_t i = 0; i < track.frame_ids.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%lld\t%lld\t%.17g\t%.17g\n",
                    static_cast<long long>(track.frame_ids[i]),
                    static_cast<long long>(track.agent_id), track.positions[i].x(),
                    track.positions[i].y());
      out << buf;
    }
  }
  if (!out) throw ParseError(path + ": write failed");
}

std::vector<RawTrack> tracks_from_rollout(const RolloutResult& result, std::int64_t start_frame,
                                          std::int64_t frame_gap) {
  std::vector<RawTrack> tracks;
  tracks.reserve(result.agent_ids.size());
  for (std::size_t a = 0; a < result.agent_ids.size(); ++a) {
    RawTrack track;
    track.agent_id = result.agent_ids[a];
    for (std::size_t k = 0; k < result.predicted[a].size(); ++k) {
      track.frame_ids.push_back(start_frame +
                                frame_gap * static_cast<std::int64_t>(kObservedLen + k));
      track.positions.push_back(result.predicted[a][k].p);
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

std::vector<TrajectoryWindow> window_split(std::span<const RawTrack> tracks, int stride,
                                           double dt) {
  if (stride < 1) throw ConfigError("window stride must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  std::vector<TrajectoryWindow> windows;
  for (const auto& track : tracks) {
    const std::size_t n = track.frame_ids.size();
    for (std::size_t s = 0; s + kWindowLen <= n; s += static_cast<std::size_t>(stride)) {
      const std::int64_t gap = track.frame_ids[s + 1] - track.frame_ids[s];
      bool uniform = gap > 0;
      for (std::size_t i = s + 1; uniform && i + 1 < s + kWindowLen; ++i) {
        uniform = track.frame_ids[i + 1] - track.frame_ids[i] == gap;
      }
      if (!uniform) continue;
      TrajectoryWindow w;
      w.agent_id = track.agent_id;
      w.start_frame = track.frame_ids[s];
      const std::vector<Vec2> slice(track.positions.begin() + static_cast<std::ptrdiff_t>(s),
                                    track.positions.begin() +
                                        static_cast<std::ptrdiff_t>(s + kWindowLen));
      w.frames = states_from_positions(slice, dt);
      w.goal = w.frames.back().p;
      validate_window(w);
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

std::vector<Cohort> build_cohorts(std::span<const TrajectoryWindow> windows,
                                  std::span<const RawTrack> tracks, std::int64_t frame_gap,
                                  double dt) {
  if (frame_gap < 1) throw ConfigError("frame gap must be >= 1");
  std::map<std::int64_t, Cohort> by_start;
  std::map<std::int64_t, std::vector<std::int64_t>> members;
  for (const auto& w : windows) {
    by_start[w.start_frame].windows.push_back(w);
    members[w.start_frame].push_back(w.agent_id);
  }

  for (auto& [start, cohort] : by_start) {
    auto& ids = members[start];
    std::sort(ids.begin(), ids.end());
    for (const auto& track : tracks) {
      if (std::binary_search(ids.begin(), ids.end(), track.agent_id)) continue;
      // Longest aligned run from the track's first frame on the cohort lattice.
      std::vector<Vec2> run;
      int first = -1;
      for (int k = 0; k < kWindowLen; ++k) {
        const std::int64_t want = start + frame_gap * k;
        const auto it = std::lower_bound(track.frame_ids.begin(), track.frame_ids.end(), want);
        const bool hit = it != track.frame_ids.end() && *it == want;
        if (!hit) {
          if (first >= 0) break;
          continue;
        }
        if (first < 0) first = k;
        run.push_back(track.positions[static_cast<std::size_t>(it - track.frame_ids.begin())]);
      }
      if (first < 0 || run.size() < 2) continue;
      ObstacleTrack obstacle;
      obstacle.agent_id = track.agent_id;
      obstacle.first_frame = first;
      obstacle.states = states_from_positions(run, dt);
      cohort.obstacles.push_back(std::move(obstacle));
    }
  }

  std::vector<Cohort> out;
  out.reserve(by_start.size());
  for (auto& [start, cohort] : by_start) out.push_back(std::move(cohort));
  return out;
}

void Homography::validate() const {
  if (!H.allFinite() || std::abs(H.determinant()) <= 1e-12) {
    throw ConfigError("homography is singular");
  }
}

Vec2 apply_homography(const Homography& h, const Vec2& point, ProjectDirection direction) {
  h.validate();
  const Eigen::Matrix3d m =
      direction == ProjectDirection::PixelToWorld ? h.H : Eigen::Matrix3d(h.H.inverse());
  const Eigen::Vector3d mapped = m * Eigen::Vector3d(point.x(), point.y(), 1.0);
  if (std::abs(mapped.z()) < 1e-12) throw DegenerateProjection("projection sent point to infinity");
  return Vec2(mapped.x() / mapped.z(), mapped.y() / mapped.z());
}

SceneGrid load_scene_grid(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  ++line_no;
  const auto header = fields_of(line);
  if (header.size() != 2) throw ParseError(path + ":1: expected 'height width'");
  SceneGrid grid;
  grid.height = parse_number<int>(header[0], path, 1, "height");
  grid.width = parse_number<int>(header[1], path, 1, "width");
  if (grid.height < 1 || grid.width < 1) throw ParseError(path + ":1: non-positive dimensions");
  grid.cells.reserve(static_cast<std::size_t>(grid.height) * grid.width);

  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = fields_of(line);
    if (f.empty()) continue;
    if (rows == grid.height) throw ParseError(path + ":" + std::to_string(line_no) + ": extra row");
    if (static_cast<int>(f.size()) != grid.width) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(grid.width) + " labels, got " + std::to_string(f.size()));
    }
    for (const auto& cell : f) {
      const int label = parse_number<int>(cell, path, line_no, "label");
      if (label < 0 || label > 2) {
        throw InvalidLabel(path + ":" + std::to_string(line_no) + ": label " +
                           std::to_string(label) + " outside {0,1,2}");
      }
      grid.cells.push_back(static_cast<CellClass>(label));
    }
    ++rows;
  }
  if (rows != grid.height) {
    throw ParseError(path + ": expected " + std::to_string(grid.height) + " rows, got " +
                     std::to_string(rows));
  }
  return grid;
}

namespace {
constexpr const char* kCheckpointMagic = "NSPCKPT 1";
}

void save_checkpoint(const std::string& path, ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(path + ": cannot open for writing");
  const auto tensors = params.all_tensors();
  out << kCheckpointMagic << "\n" << "tensors " << tensors.size() << "\n";
  std::int64_t offset = 0;
  for (const auto* t : tensors) {
    out << t->name << " " << t->data.rows() << " " << t->data.cols() << " " << offset << "\n";
    offset += t->data.size();
  }
  out << "data\n";
  for (const auto* t : tensors) {
    // Column-major Eigen storage streamed as-is; the host is little-endian.
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(sizeof(double) * t->data.size()));
  }
  if (!out) throw CheckpointError(path + ": write failed");
}

void load_checkpoint(const std::string& path, ModelParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw CheckpointError(path + ": not a checkpoint (bad magic)");
  }
  if (!std::getline(in, line)) throw CheckpointError(path + ": truncated header");
  std::istringstream count_line(line);
  std::string word;
  std::size_t count = 0;
  if (!(count_line >> word >> count) || word != "tensors") {
    throw CheckpointError(path + ": bad tensor count line");
  }

  struct Entry {
    std::int64_t rows = 0, cols = 0, offset = 0;
  };
  std::map<std::string, Entry> manifest;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw CheckpointError(path + ": truncated manifest");
    std::istringstream row(line);
    std::string name;
    Entry e;
    if (!(row >> name >> e.rows >> e.cols >> e.offset) || e.rows < 1 || e.cols < 1) {
      throw CheckpointError(path + ": bad manifest row '" + line + "'");
    }
    if (!manifest.emplace(name, e).second) {
      throw CheckpointError(path + ": duplicate tensor '" + name + "'");
    }
    total += e.rows * e.cols;
  }
  if (!std::getline(in, line) || line != "data") throw CheckpointError(path + ": missing data block");

  std::vector<double> block(static_cast<std::size_t>(total));
  in.read(reinterpret_cast<char*>(block.data()),
          static_cast<std::streamsize>(sizeof(double) * block.size()));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * block.size())) {
    throw CheckpointError(path + ": data block truncated");
  }

  auto tensors = params.all_tensors();
  if (tensors.size() != manifest.size()) {
    throw CheckpointError(path + ": checkpoint holds " + std::to_string(manifest.size()) +
                          " tensors, model has " + std::to_string(tensors.size()));
  }
  for (auto* t : tensors) {
    const auto it = manifest.find(t->name);
    if (it == manifest.end()) throw CheckpointError(path + ": missing tensor '" + t->name + "'");
    const Entry& e = it->second;
    if (e.rows != t->data.rows() || e.cols != t->data.cols()) {
      throw CheckpointError(path + ": shape mismatch for '" + t->name + "'");
    }
    if (e.offset < 0 || e.offset + e.rows * e.cols > total) {
      throw CheckpointError(path + ": offset out of range for '" + t->name + "'");
    }
    std::copy_n(block.data() + e.offset, t->data.size(), t->data.data());
  }
}

}  // namespace nsp
