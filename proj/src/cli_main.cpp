#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "nsp/cvae.hpp"
#include "nsp/data_io.hpp"
#include "nsp/evaluation.hpp"
#include "nsp/networks.hpp"
#include "nsp/training.hpp"

namespace {

using namespace nsp;

struct FileMissing : Error {
  using Error::Error;
};

const std::string& require_file(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw FileMissing(std::string(what) + " not found: " + path);
  }
  return path;
}

// ---- config file ----------------------------------------------------------
// Flat key=value lines, '#' comments. Keys mirror NspConfig / TrainConfig
// field names; unknown keys are rejected so typos fail loudly.

struct RunConfig {
  NspConfig model;
  TrainConfig train;
  bool lr_pinned = false;  // stage 3 keeps its lower default unless the file or a flag sets one
  int stride = 20;         // frames between consecutive window starts
};

double parse_double(const std::string& key, const std::string& raw) {
  double v{};
  const char* b = raw.data();
  const char* e = raw.data() + raw.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) {
    throw ConfigError("config key '" + key + "': bad number '" + raw + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& raw) {
  long long v{};
  const char* b = raw.data();
  const char* e = raw.data() + raw.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) {
    throw ConfigError("config key '" + key + "': bad integer '" + raw + "'");
  }
  return v;
}

void assign_key(RunConfig& rc, const std::string& key, const std::string& value) {
  auto& m = rc.model;
  auto& t = rc.train;
  if (key == "a_tau") m.a_tau = parse_double(key, value);
  else if (key == "b_tau") m.b_tau = parse_double(key, value);
  else if (key == "a_k") m.a_k = parse_double(key, value);
  else if (key == "b_k") m.b_k = parse_double(key, value);
  else if (key == "omega") m.omega = parse_double(key, value);
  else if (key == "r_col") m.r_col = parse_double(key, value);
  else if (key == "r_env") m.r_env = parse_double(key, value);
  else if (key == "sigma_goal") m.sigma_goal = parse_double(key, value);
  else if (key == "sigma_latent") m.sigma_latent = parse_double(key, value);
  else if (key == "lambda_weak") m.lambda_weak = parse_double(key, value);
  else if (key == "lambda_kl") m.lambda_kl = parse_double(key, value);
  else if (key == "dt") m.dt = parse_double(key, value);
  else if (key == "cvae_scale") m.cvae_scale = parse_double(key, value);
  else if (key == "learning_rate") {
    t.learning_rate = parse_double(key, value);
    rc.lr_pinned = true;
  } else if (key == "beta1") t.beta1 = parse_double(key, value);
  else if (key == "beta2") t.beta2 = parse_double(key, value);
  else if (key == "epsilon") t.epsilon = parse_double(key, value);
  else if (key == "epochs") t.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "batch_size") t.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "k_env_init") t.k_env_init = parse_double(key, value);
  else if (key == "stride") rc.stride = static_cast<int>(parse_int(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void apply_line(RunConfig& rc, const std::string& raw, const std::string& where) {
  std::string line = raw;
  if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
  line = trimmed(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(where + ": expected key=value, got '" + line + "'");
  }
  assign_key(rc, trimmed(line.substr(0, eq)), trimmed(line.substr(eq + 1)));
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileMissing("config file not readable: " + path);
  RunConfig rc;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    apply_line(rc, line, path + ":" + std::to_string(n));
  }
  return rc;
}

void apply_sets(RunConfig& rc, const std::vector<std::string>& sets) {
  for (const auto& s : sets) apply_line(rc, s, "--set " + s);
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("NSP_THREADS")) {
    const std::string raw(env);
    long long v{};
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec == std::errc{} && p == raw.data() + raw.size() && v > 0) return static_cast<int>(v);
  }
  return 1;
}

// ---- shared data plumbing -------------------------------------------------

struct LoadedData {
  std::vector<RawTrack> tracks;
  std::vector<Cohort> cohorts;
  std::int64_t frame_gap = 1;
};

LoadedData load_windows(const std::string& data_path, double dt, int stride) {
  LoadedData out;
  out.tracks = load_trajectories(require_file(data_path, "trajectory file"));
  for (const auto& t : out.tracks) {
    if (t.frame_ids.size() >= 2) {
      out.frame_gap = t.frame_ids[1] - t.frame_ids[0];
      break;
    }
  }
  const auto windows = window_split(out.tracks, stride, dt);
  out.cohorts = build_cohorts(windows, out.tracks, out.frame_gap, dt);
  if (out.cohorts.empty()) {
    throw ConfigError("no complete " + std::to_string(kWindowLen) + "-frame windows in " +
                      data_path);
  }
  return out;
}

// Rollout pieces from different cohorts can hit the same agent; rows merge by
// (agent, frame) and the first prediction for a frame wins.
std::vector<RawTrack> merge_tracks(const std::vector<RawTrack>& pieces) {
  std::map<std::int64_t, std::map<std::int64_t, Vec2>> rows;
  for (const auto& t : pieces) {
    auto& dest = rows[t.agent_id];
    for (std::size_t i = 0; i < t.frame_ids.size(); ++i) {
      dest.emplace(t.frame_ids[i], t.positions[i]);
    }
  }
  std::vector<RawTrack> merged;
  merged.reserve(rows.size());
  for (const auto& [id, frames] : rows) {
    RawTrack t;
    t.agent_id = id;
    for (const auto& [frame, pos] : frames) {
      t.frame_ids.push_back(frame);
      t.positions.push_back(pos);
    }
    merged.push_back(std::move(t));
  }
  return merged;
}

std::vector<Vec2> stored_future(const TrajectoryWindow& w) {
  std::vector<Vec2> out;
  out.reserve(kPredictLen);
  for (int t = kObservedLen; t < kWindowLen; ++t) out.push_back(w.frames[t].p);
  return out;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config, data, scene, out;
  std::string stage = "all";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int stage_number(TrainStage s) {
  switch (s) {
    case TrainStage::GoalOnly: return 1;
    case TrainStage::AddRepulsion: return 2;
    case TrainStage::CvaeOnly: return 3;
  }
  return 0;
}

int cmd_train(const TrainArgs& a) {
  RunConfig rc = parse_config(require_file(a.config, "config file"));
  apply_sets(rc, a.sets);
  if (a.seed_given) rc.train.seed = a.seed;
  rc.model.validate();

  const auto grid = load_scene_grid(require_file(a.scene, "scene file"));
  const auto data = load_windows(a.data, rc.model.dt, rc.stride);
  std::printf("data cohorts=%zu frame_gap=%lld\n", data.cohorts.size(),
              static_cast<long long>(data.frame_gap));

  ModelParams params;
  std::mt19937_64 rng(rc.train.seed);
  params.init(rng);

  auto stage_tc = [&](TrainStage s) {
    TrainConfig tc = rc.train;
    tc.stage = s;
    if (s == TrainStage::CvaeOnly && !rc.lr_pinned) tc.learning_rate = 1e-5;
    return tc;
  };
  std::vector<TrainConfig> schedule;
  if (a.stage == "1" || a.stage == "all") schedule.push_back(stage_tc(TrainStage::GoalOnly));
  if (a.stage == "2" || a.stage == "all") schedule.push_back(stage_tc(TrainStage::AddRepulsion));
  if (a.stage == "3" || a.stage == "all") schedule.push_back(stage_tc(TrainStage::CvaeOnly));

  const auto report = progressive_train(data.cohorts, grid, params, rc.model, schedule);
  for (const auto& tc : schedule) {
    double first = 0.0, last = 0.0;
    int epochs = 0;
    for (const auto& rec : report.log) {
      if (rec.stage != tc.stage) continue;
      if (epochs == 0) first = rec.loss;
      last = rec.loss;
      ++epochs;
    }
    std::printf("stage %d epochs=%d loss_first=%.8g loss_last=%.8g\n", stage_number(tc.stage),
                epochs, first, last);
  }

  save_checkpoint(a.out, params);
  std::printf("checkpoint %s\n", a.out.c_str());
  return 0;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string ckpt, data, scene, out, config;
  std::string mode = "det";
  int samples = 20;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_predict(const PredictArgs& a) {
  RunConfig rc = a.config.empty() ? RunConfig{} : parse_config(require_file(a.config, "config file"));
  apply_sets(rc, a.sets);
  rc.model.validate();
  if (a.samples < 1) throw ConfigError("--samples must be >= 1");

  const auto grid = load_scene_grid(require_file(a.scene, "scene file"));
  const auto data = load_windows(a.data, rc.model.dt, rc.stride);
  ModelParams params;
  load_checkpoint(require_file(a.ckpt, "checkpoint"), params);

  std::mt19937_64 rng(a.seed);
  const int threads = resolve_threads(a.threads);

  std::vector<RawTrack> pieces;
  for (const auto& cohort : data.cohorts) {
    RolloutResult result;
    if (a.mode == "det") {
      result = rollout_window(cohort.windows, grid, params, rc.model, RolloutMode::Deterministic,
                              rng, {}, cohort.obstacles, threads);
    } else if (a.mode == "ultra") {
      result = rollout_window(cohort.windows, grid, params, rc.model, RolloutMode::Ultra, rng,
                              cohort.windows, cohort.obstacles, threads);
    } else {  // sto: best-of-K goal candidates per agent, judged against the stored future
      std::vector<std::size_t> order(cohort.windows.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return cohort.windows[x].agent_id < cohort.windows[y].agent_id;
      });
      auto variant = cohort.windows;
      std::vector<double> best_ade;
      for (int k = 0; k < a.samples; ++k) {
        for (const std::size_t i : order) {
          const Vec2 g =
              standard_sample_goals(cohort.windows[i].goal, rc.model.sigma_goal, 1, rng).front();
          variant[i].goal = g;
          variant[i].frames.back().p = g;
        }
        auto run = rollout_window(variant, grid, params, rc.model, RolloutMode::Stochastic, rng,
                                  {}, cohort.obstacles, threads);
        if (k == 0) {
          result = run;
          best_ade.assign(run.agent_ids.size(), std::numeric_limits<double>::infinity());
        }
        for (std::size_t j = 0; j < run.agent_ids.size(); ++j) {
          const TrajectoryWindow* truth = nullptr;
          for (const auto& w : cohort.windows) {
            if (w.agent_id == run.agent_ids[j]) truth = &w;
          }
          std::vector<Vec2> pred;
          pred.reserve(run.predicted[j].size());
          for (const auto& s : run.predicted[j]) pred.push_back(s.p);
          const double ade = displacement_errors(pred, stored_future(*truth)).ade;
          if (ade < best_ade[j]) {
            best_ade[j] = ade;
            result.predicted[j] = run.predicted[j];
          }
        }
      }
    }
    const auto tracks =
        tracks_from_rollout(result, cohort.windows.front().start_frame, data.frame_gap);
    pieces.insert(pieces.end(), tracks.begin(), tracks.end());
  }

  const auto merged = merge_tracks(pieces);
  save_trajectories(a.out, merged);
  std::printf("predict mode=%s cohorts=%zu tracks=%zu out=%s\n", a.mode.c_str(),
              data.cohorts.size(), merged.size(), a.out.c_str());
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string ckpt, scene, out, config;
  int agents = 0;
  std::uint64_t seed = 0;
  double seconds = 30.0;
  double fps = 10.0;
  double speed_min = 8.0;
  double speed_max = 15.0;
  bool goal_only = false;
  std::vector<std::string> sets;
  int threads = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  RunConfig rc = a.config.empty() ? RunConfig{} : parse_config(require_file(a.config, "config file"));
  apply_sets(rc, a.sets);
  rc.model.validate();

  const auto grid = load_scene_grid(require_file(a.scene, "scene file"));
  ModelParams params;
  load_checkpoint(require_file(a.ckpt, "checkpoint"), params);

  std::mt19937_64 rng(a.seed);
  const auto scenario = generate_scenario(grid, a.agents, a.speed_min, a.speed_max, rng);

  SimulateOptions opts;
  opts.seconds = a.seconds;
  opts.fps = a.fps;
  opts.goal_only = a.goal_only;
  opts.threads = resolve_threads(a.threads);
  const auto sim = simulate_free(scenario, grid, params, rc.model, opts);

  std::vector<RawTrack> tracks;
  tracks.reserve(sim.frames_by_agent.size());
  for (std::size_t i = 0; i < sim.frames_by_agent.size(); ++i) {
    RawTrack t;
    t.agent_id = sim.agent_ids[i];
    for (std::size_t f = 0; f < sim.frames_by_agent[i].size(); ++f) {
      t.frame_ids.push_back(static_cast<std::int64_t>(f));
      t.positions.push_back(sim.frames_by_agent[i][f].p);
    }
    tracks.push_back(std::move(t));
  }
  save_trajectories(a.out, tracks);
  std::printf("simulate agents=%zu frames=%zu dt=%.6g out=%s\n", tracks.size(),
              tracks.empty() ? 0 : tracks.front().frame_ids.size(), sim.sim_dt, a.out.c_str());
  return 0;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string pred, truth, homography;
  double collision_r = 0.0;
};

Homography load_homography(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileMissing("homography file not readable: " + path);
  Homography h;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!(in >> h.H(r, c))) {
        throw ParseError(path + ": expected 9 numbers for a 3x3 homography");
      }
    }
  }
  double extra;
  if (in >> extra) throw ParseError(path + ": more than 9 numbers in homography file");
  h.validate();
  return h;
}

int cmd_evaluate(const EvaluateArgs& a) {
  auto pred = load_trajectories(require_file(a.pred, "prediction file"));
  auto truth = load_trajectories(require_file(a.truth, "truth file"));
  if (!a.homography.empty()) {
    const Homography h = load_homography(a.homography);
    for (auto* set : {&pred, &truth}) {
      for (auto& t : *set) {
        for (auto& p : t.positions) p = apply_homography(h, p, ProjectDirection::PixelToWorld);
      }
    }
  }

  std::map<std::int64_t, const RawTrack*> truth_by_id;
  for (const auto& t : truth) truth_by_id[t.agent_id] = &t;

  std::vector<DisplacementErrors> per_agent;
  for (const auto& pt : pred) {
    const auto it = truth_by_id.find(pt.agent_id);
    if (it == truth_by_id.end()) continue;
    const RawTrack& tt = *it->second;
    std::vector<Vec2> p, q;
    std::size_t j = 0;
    for (std::size_t i = 0; i < pt.frame_ids.size(); ++i) {
      while (j < tt.frame_ids.size() && tt.frame_ids[j] < pt.frame_ids[i]) ++j;
      if (j < tt.frame_ids.size() && tt.frame_ids[j] == pt.frame_ids[i]) {
        p.push_back(pt.positions[i]);
        q.push_back(tt.positions[j]);
      }
    }
    if (!p.empty()) per_agent.push_back(displacement_errors(p, q));
  }
  if (per_agent.empty()) {
    throw ConfigError("no overlapping (agent, frame) samples between prediction and truth");
  }
  const auto mean = mean_errors(per_agent);
  std::printf("ADE %.6g\n", mean.ade);
  std::printf("FDE %.6g\n", mean.fde);

  if (a.collision_r > 0.0) {
    // Pairwise over frames both agents cover; pairs that never coexist are
    // not counted in the denominator.
    std::size_t pairs = 0, colliding = 0;
    for (std::size_t x = 0; x < pred.size(); ++x) {
      for (std::size_t y = x + 1; y < pred.size(); ++y) {
        const RawTrack& ax = pred[x];
        const RawTrack& ay = pred[y];
        double closest = std::numeric_limits<double>::infinity();
        bool shared = false;
        std::size_t j = 0;
        for (std::size_t i = 0; i < ax.frame_ids.size(); ++i) {
          while (j < ay.frame_ids.size() && ay.frame_ids[j] < ax.frame_ids[i]) ++j;
          if (j < ay.frame_ids.size() && ay.frame_ids[j] == ax.frame_ids[i]) {
            shared = true;
            closest = std::min(closest, (ax.positions[i] - ay.positions[j]).norm());
          }
        }
        if (!shared) continue;
        ++pairs;
        if (closest < 2.0 * a.collision_r) ++colliding;
      }
    }
    if (pairs == 0) throw TooFewAgents("collision rate needs two agents sharing frames");
    std::printf("collision_rate %.6g\n",
                static_cast<double>(colliding) / static_cast<double>(pairs));
  }
  return 0;
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckArgs {
  std::string ckpt, config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  RunConfig rc = a.config.empty() ? RunConfig{} : parse_config(require_file(a.config, "config file"));
  apply_sets(rc, a.sets);
  rc.model.validate();

  ModelParams params;
  load_checkpoint(require_file(a.ckpt, "checkpoint"), params);

  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> pos(20.0, 180.0);
  std::uniform_real_distribution<double> vel(-8.0, 8.0);
  AgentState q;
  q.p = Vec2(pos(rng), pos(rng));
  q.v = Vec2(vel(rng), vel(rng));
  AgentState qn;
  qn.p = Vec2(pos(rng), pos(rng));
  qn.v = Vec2(vel(rng), vel(rng));
  const Vec2 goal(pos(rng), pos(rng));

  const double tol = 1e-4;
  bool ok = true;
  auto report = [&](const char* name, double err) {
    const bool pass = err < tol;
    ok = ok && pass;
    std::printf("gradcheck %s rel_err=%.3g %s\n", name, err, pass ? "PASS" : "FAIL");
  };

  {
    auto tensors = params.goal_net.tensors();
    report("goal_net", ad::grad_check(
                           [&](ad::Tape& tape) {
                             auto state = params.goal_net.initial_state(tape);
                             return goal_tau(tape, params.goal_net, state, q, goal, rc.model);
                           },
                           tensors, 1e-6, 1e-8));
  }
  {
    auto tensors = params.collision_net.tensors();
    report("collision_net",
           ad::grad_check(
               [&](ad::Tape& tape) {
                 return collision_k(tape, params.collision_net, q, qn, rc.model);
               },
               tensors, 1e-6, 1e-8));
  }
  {
    Eigen::MatrixXd alpha(2, 1);
    alpha << 0.012, -0.007;
    Eigen::MatrixXd hist(16, 1);
    std::uniform_real_distribution<double> unit01(0.0, 1.0);
    for (int i = 0; i < 16; ++i) hist(i, 0) = unit01(rng);
    Eigen::VectorXd eps(params.cvae.latent_dim);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < params.cvae.latent_dim; ++i) eps(i) = unit(rng);
    auto tensors = params.cvae.tensors();
    report("cvae", ad::grad_check(
                       [&](ad::Tape& tape) {
                         const auto fwd = cvae_train_forward(tape, params.cvae, alpha, hist, eps);
                         ad::Value rec = ad::sum_sq(ad::sub(fwd.alpha_hat, tape.constant(alpha)));
                         ad::Value kl = kl_to_standard_normal(tape, fwd.mu, fwd.logvar);
                         return ad::add(rec, kl);
                       },
                       tensors, 1e-5, 1e-8));
  }

  if (!ok) {
    std::cerr << "error: Error: gradient check failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural social physics crowd engine"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "fit model parameters on trajectory windows");
  t->add_option("--config", train.config, "flat key=value config file")->required();
  t->add_option("--data", train.data, "trajectory file (agent frame x y rows)")->required();
  t->add_option("--scene", train.scene, "scene grid file")->required();
  t->add_option("--stage", train.stage, "training stage")
      ->check(CLI::IsMember({"1", "2", "3", "all"}));
  t->add_option("--out", train.out, "checkpoint output path")->required();
  t->add_option("--seed", train.seed, "overrides the config seed")
      ->each([&](const std::string&) { train.seed_given = true; });
  t->add_option("--set", train.sets, "key=value config override (repeatable)");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "roll predictions for every complete window");
  p->add_option("--ckpt", predict.ckpt, "trained checkpoint")->required();
  p->add_option("--data", predict.data, "trajectory file with observed windows")->required();
  p->add_option("--scene", predict.scene, "scene grid file")->required();
  p->add_option("--mode", predict.mode, "det | sto | ultra")
      ->check(CLI::IsMember({"det", "sto", "ultra"}));
  p->add_option("--samples", predict.samples, "goal candidates for sto mode");
  p->add_option("--out", predict.out, "predicted trajectory output path")->required();
  p->add_option("--config", predict.config, "optional config file");
  p->add_option("--set", predict.sets, "key=value config override (repeatable)");
  p->add_option("--seed", predict.seed, "rng seed for goal and residual draws");
  p->add_option("--threads", predict.threads, "worker cap (NSP_THREADS fallback)");

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "free-running crowd simulation on a scene grid");
  s->add_option("--ckpt", simulate.ckpt, "trained checkpoint")->required();
  s->add_option("--scene", simulate.scene, "scene grid file")->required();
  s->add_option("--agents", simulate.agents, "number of agents")->required()
      ->check(CLI::PositiveNumber);
  s->add_option("--seed", simulate.seed, "scenario seed");
  s->add_option("--seconds", simulate.seconds, "simulated duration");
  s->add_option("--fps", simulate.fps, "simulation frame rate");
  s->add_option("--speed-min", simulate.speed_min, "initial speed lower bound");
  s->add_option("--speed-max", simulate.speed_max, "initial speed upper bound");
  s->add_flag("--goal-only", simulate.goal_only, "ablation: goal force only");
  s->add_option("--out", simulate.out, "trajectory output path")->required();
  s->add_option("--config", simulate.config, "optional config file");
  s->add_option("--set", simulate.sets, "key=value config override (repeatable)");
  s->add_option("--threads", simulate.threads, "worker cap (NSP_THREADS fallback)");

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "score predictions against ground truth");
  e->add_option("--pred", evaluate.pred, "predicted trajectory file")->required();
  e->add_option("--truth", evaluate.truth, "ground-truth trajectory file")->required();
  e->add_option("--homography", evaluate.homography, "3x3 pixel-to-world matrix file");
  e->add_option("--collision-r", evaluate.collision_r, "agent disc radius; enables collision rate")
      ->check(CLI::PositiveNumber);

  GradcheckArgs gradcheck;
  auto* g = app.add_subcommand("gradcheck", "finite-difference audit of a checkpoint");
  g->add_option("--ckpt", gradcheck.ckpt, "checkpoint to audit")->required();
  g->add_option("--config", gradcheck.config, "optional config file");
  g->add_option("--set", gradcheck.sets, "key=value config override (repeatable)");
  g->add_option("--seed", gradcheck.seed, "probe seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: UsageError: " << ex.what() << "\n";
    return 2;
  }

  try {
    if (t->parsed()) return cmd_train(train);
    if (p->parsed()) return cmd_predict(predict);
    if (s->parsed()) return cmd_simulate(simulate);
    if (e->parsed()) return cmd_evaluate(evaluate);
    if (g->parsed()) return cmd_gradcheck(gradcheck);
  } catch (const ConfigError& ex) {
    std::cerr << "error: ConfigError: " << ex.what() << "\n";
    return 1;
  } catch (const FileMissing& ex) {
    std::cerr << "error: IoError: " << ex.what() << "\n";
    return 1;
  } catch (const ParseError& ex) {
    std::cerr << "error: IoError: " << ex.what() << "\n";
    return 1;
  } catch (const CheckpointError& ex) {
    std::cerr << "error: IoError: " << ex.what() << "\n";
    return 1;
  } catch (const Error& ex) {
    std::cerr << "error: Error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
