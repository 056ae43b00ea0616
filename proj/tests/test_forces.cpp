#include "nsp/forces.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

using namespace nsp;

TEST_CASE("desired velocity covers the remaining distance in the remaining time") {
  CHECK(desired_velocity(Vec2(0, 0), Vec2(6, 0), 7, 19, 0.5) == Vec2(1, 0));
  CHECK(desired_velocity(Vec2(3, 3), Vec2(3, 3), 4, 19, 0.4) == Vec2(0, 0));
  CHECK(desired_velocity(Vec2(0, 0), Vec2(0.4, 0), 18, 19, 0.4) == Vec2(1, 0));
  const Vec2 v = desired_velocity(Vec2(0, 0), Vec2(4.8, 0), 7, 19, 0.4);
  CHECK(v.x() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.y() == 0.0);
}

TEST_CASE("desired velocity rejects exhausted time") {
  CHECK_THROWS_AS(desired_velocity(Vec2(0, 0), Vec2(1, 0), 19, 19, 0.4), TimeExhausted);
  CHECK_THROWS_AS(desired_velocity(Vec2(0, 0), Vec2(1, 0), 20, 19, 0.4), TimeExhausted);
}

TEST_CASE("goal force relaxes toward the desired velocity") {
  CHECK(goal_force(1.0, Vec2(1, 0), Vec2(0, 0)) == Vec2(1, 0));
  CHECK(goal_force(0.7, Vec2(2, -1), Vec2(2, -1)) == Vec2(0, 0));
  CHECK(goal_force(0.5, Vec2(2, 0), Vec2(1, 0)) == Vec2(2, 0));
  CHECK_THROWS_AS(goal_force(0.0, Vec2(1, 0), Vec2(0, 0)), NonPositiveTau);
  CHECK_THROWS_AS(goal_force(-1.0, Vec2(1, 0), Vec2(0, 0)), NonPositiveTau);
}

TEST_CASE("collision force spot values") {
  const Vec2 f = collision_force(1.0, Vec2(75, 0), 75.0);
  CHECK(f.x() == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(f.y() == 0.0);

  CHECK(collision_force(0.0, Vec2(3, 4), 75.0) == Vec2(0, 0));

  const Vec2 fneg = collision_force(1.0, Vec2(-75, 0), 75.0);
  CHECK(fneg.x() == doctest::Approx(-std::exp(-1.0)).epsilon(1e-12));
  CHECK(fneg.y() == 0.0);

  CHECK_THROWS_AS(collision_force(1.0, Vec2(0, 0), 75.0), CoincidentAgents);
}

TEST_CASE("collision force matches the negative potential gradient on 1000 instances") {
  // U = r_col k exp(-|r|/r_col); force = -grad U.
  auto potential = [](double k, const Vec2& r, double r_col) {
    return r_col * k * std::exp(-r.norm() / r_col);
  };
  std::mt19937_64 rng(20240818);
  std::uniform_real_distribution<double> kdist(0.1, 100.0);
  std::uniform_real_distribution<double> rcdist(5.0, 150.0);
  std::uniform_real_distribution<double> angdist(0.0, 2.0 * M_PI);
  const double h = 1e-4;

  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double k = kdist(rng);
    const double r_col = rcdist(rng);
    std::uniform_real_distribution<double> raddist(1.0, 3.0 * r_col);
    const double ang = angdist(rng);
    const Vec2 r = raddist(rng) * Vec2(std::cos(ang), std::sin(ang));

    const Vec2 f = collision_force(k, r, r_col);
    const Vec2 fd(-(potential(k, r + Vec2(h, 0), r_col) - potential(k, r - Vec2(h, 0), r_col)) / (2 * h),
                  -(potential(k, r + Vec2(0, h), r_col) - potential(k, r - Vec2(0, h), r_col)) / (2 * h));
    worst = std::max(worst, (f - fd).norm() / std::max(f.norm(), 1e-12));
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(worst < 1e-5);
  CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() < 1000);
}

TEST_CASE("collision force magnitude decreases with distance") {
  const Vec2 dir = Vec2(1, 2).normalized();
  double prev = std::numeric_limits<double>::infinity();
  for (double d = 1.0; d <= 300.0; d += 7.3) {
    const double mag = collision_force(3.0, d * dir, 75.0).norm();
    CHECK(mag < prev);
    prev = mag;
  }
}

TEST_CASE("collision and environment forces are rotation-equivariant") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dist(-40.0, 40.0);
  std::uniform_real_distribution<double> angdist(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 100; ++trial) {
    const double th = angdist(rng);
    Eigen::Matrix2d R;
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);

    const Vec2 r(dist(rng), dist(rng));
    if (r.norm() < 1e-6) continue;
    const Vec2 f = collision_force(2.5, r, 60.0);
    const Vec2 fr = collision_force(2.5, R * r, 60.0);
    CHECK((R * f - fr).norm() < 1e-9);

    const Vec2 p(dist(rng), dist(rng));
    const Vec2 obs(dist(rng), dist(rng));
    const Vec2 wobs(dist(rng), dist(rng));
    if ((p - obs).norm() < 1e-6 || (p - wobs).norm() < 1e-6) continue;
    const Vec2 e = env_force(2.0, p, obs, wobs, 0.2);
    const Vec2 er = env_force(2.0, Vec2(R * p), Vec2(R * obs), Vec2(R * wobs), 0.2);
    CHECK((R * e - er).norm() < 1e-9);
  }
}

TEST_CASE("goal force is linear in the velocity gap and inverse in tau") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec2 vd(dist(rng), dist(rng));
    const Vec2 v(dist(rng), dist(rng));
    const double tau = 0.3 + std::abs(dist(rng));
    const double c = 1.0 + std::abs(dist(rng));
    const Vec2 base = goal_force(tau, vd, v);
    CHECK((goal_force(tau, Vec2(c * (vd - v) + v), v) - c * base).norm() < 1e-9);
    CHECK((goal_force(c * tau, vd, v) - base / c).norm() < 1e-9);
  }
}

TEST_CASE("environment force spot values") {
  CHECK((env_force(2.0, Vec2(3, 0), Vec2(0, 0), std::nullopt, 0.2) - Vec2(2.0 / 3.0, 0)).norm() < 1e-12);
  CHECK(env_force(2.0, Vec2(3, 0), std::nullopt, std::nullopt, 0.2) == Vec2(0, 0));
  CHECK((env_force(1.0, Vec2(1, 0), std::nullopt, Vec2(0, 0), 0.2) - Vec2(0.2, 0)).norm() < 1e-12);
  CHECK_THROWS_AS(env_force(1.0, Vec2(1, 1), Vec2(1, 1), std::nullopt, 0.2), CoincidentObstacle);
}

// --- composed acceleration -------------------------------------------------

namespace {

NspConfig sdd_config() {
  return NspConfig{};
}

}  // namespace

TEST_CASE("with no neighbors and no grid the total is the goal force alone") {
  ModelParams params;
  const NspConfig cfg = sdd_config();
  AgentState self;
  self.p = Vec2(10, 10);
  self.v = Vec2(1, 0);
  SceneGrid grid;

  ad::Tape tape;
  auto state = params.goal_net.initial_state(tape);
  const auto bd = net_acceleration(self, Vec2(58, 10), {}, grid, params, state, tape, cfg, 7, 19);
  CHECK(bd.f_col == Vec2(0, 0));
  CHECK(bd.f_env == Vec2(0, 0));
  CHECK(bd.total == bd.f_goal);

  // Zero weights force tau = 0.9; check the closed form end to end.
  const Vec2 v_des = desired_velocity(self.p, Vec2(58, 10), 7, 19, cfg.dt);
  const Vec2 expect = goal_force(1.0 * 0.5 + cfg.b_tau, v_des, self.v);
  CHECK(bd.f_goal == expect);
}

TEST_CASE("two identical neighbors double the collision force") {
  ModelParams params;
  const NspConfig cfg = sdd_config();
  AgentState self;
  self.p = Vec2(0, 0);
  self.v = Vec2(1, 0);
  AgentState other;
  other.p = Vec2(20, 0);
  other.v = Vec2(-1, 0);
  SceneGrid grid;

  ad::Tape t1;
  auto s1 = params.goal_net.initial_state(t1);
  std::vector<AgentState> one = {other};
  const auto bd1 = net_acceleration(self, Vec2(80, 0), one, grid, params, s1, t1, cfg, 7, 19);

  ad::Tape t2;
  auto s2 = params.goal_net.initial_state(t2);
  std::vector<AgentState> two = {other, other};
  const auto bd2 = net_acceleration(self, Vec2(80, 0), two, grid, params, s2, t2, cfg, 7, 19);

  CHECK(bd1.f_col.norm() > 0.0);
  CHECK((bd2.f_col - 2.0 * bd1.f_col).norm() < 1e-12);
}

TEST_CASE("breakdown total equals term-by-term recomputation") {
  std::mt19937_64 rng(404);
  ModelParams params;
  params.init(rng);
  params.k_env.data(0, 0) = 2.5;
  NspConfig cfg = sdd_config();

  AgentState self;
  self.p = Vec2(30, 28);
  self.v = Vec2(2.5, 0.5);
  std::vector<AgentState> others(3);
  others[0].p = Vec2(45, 30);
  others[0].v = Vec2(-1, 0);
  others[1].p = Vec2(33, 20);
  others[1].v = Vec2(0, 1);
  others[2].p = Vec2(200, 200);  // far outside r_col
  others[2].v = Vec2(1, 1);

  SceneGrid grid;
  grid.height = 120;
  grid.width = 120;
  grid.cells.assign(120 * 120, CellClass::Walkable);
  grid.at(30, 50) = CellClass::Unwalkable;
  grid.at(31, 50) = CellClass::Unwalkable;
  grid.at(29, 44) = CellClass::WeakObstacle;

  const Vec2 goal(110, 40);
  const int t = 9, T = 19;

  ad::Tape tape;
  auto gstate = params.goal_net.initial_state(tape);
  const auto bd = net_acceleration(self, goal, others, grid, params, gstate, tape, cfg, t, T);

  CHECK(bd.total == bd.f_goal + bd.f_col + bd.f_env);

  // Independent recomposition: tau and k through the same networks on a fresh
  // tape, then the closed-form terms.
  ad::Tape oracle;
  auto ostate = params.goal_net.initial_state(oracle);
  const double tau = goal_tau(oracle, params.goal_net, ostate, self, goal, cfg).m()(0, 0);
  const Vec2 fg = goal_force(tau, desired_velocity(self.p, goal, t, T, cfg.dt), self.v);

  std::vector<AgentState> all = {self};
  for (const auto& o : others) all.push_back(o);
  Vec2 fc(0, 0);
  for (std::size_t j : neighborhood(all, 0, cfg.omega, cfg.r_col)) {
    const double k = collision_k(oracle, params.collision_net, self, all[j], cfg).m()(0, 0);
    fc = fc + collision_force(k, self.p - all[j].p, cfg.r_col);
  }

  const auto field = view_field(self, cfg.r_env);
  const auto cents = obstacle_centroids(grid, field);
  const Vec2 fe = env_force(params.k_env.data(0, 0), self.p, cents.obs, cents.wobs, cfg.lambda_weak);

  CHECK((bd.f_goal - fg).norm() < 1e-12);
  CHECK((bd.f_col - fc).norm() < 1e-12);
  CHECK((bd.f_env - fe).norm() < 1e-12);
  CHECK((bd.total - (fg + fc + fe)).norm() < 1e-12);
}

TEST_CASE("coincident neighbor raises by default and is countable otherwise") {
  ModelParams params;
  const NspConfig cfg = sdd_config();
  AgentState self;
  self.p = Vec2(5, 5);
  self.v = Vec2(1, 0);
  AgentState twin = self;
  SceneGrid grid;
  std::vector<AgentState> others = {twin};

  {
    ad::Tape tape;
    auto state = params.goal_net.initial_state(tape);
    CHECK_THROWS_AS(net_acceleration(self, Vec2(50, 5), others, grid, params, state, tape, cfg, 7, 19),
                    CoincidentAgents);
  }
  {
    ad::Tape tape;
    auto state = params.goal_net.initial_state(tape);
    ForceOptions opts;
    opts.raise_on_degenerate = false;
    std::vector<AgentNode> nodes = {
        AgentNode{tape.constant(self.p), tape.constant(self.v)},
        AgentNode{tape.constant(twin.p), tape.constant(twin.v)},
    };
    const auto g = agent_force_graph(tape, nodes, 0, tape.constant(Vec2(50, 5)), grid, params, state,
                                     cfg, 7, 19, opts);
    CHECK(g.degenerate_terms == 1);
    CHECK(g.f_col.m().norm() == 0.0);
  }
}

TEST_CASE("stage-1 style options disable the repulsive terms") {
  std::mt19937_64 rng(811);
  ModelParams params;
  params.init(rng);
  const NspConfig cfg = sdd_config();
  AgentState self;
  self.p = Vec2(10, 10);
  self.v = Vec2(1, 1);
  AgentState other;
  other.p = Vec2(18, 12);
  other.v = Vec2(0, 0);
  SceneGrid grid;
  grid.height = 64;
  grid.width = 64;
  grid.cells.assign(64 * 64, CellClass::Walkable);
  grid.at(20, 20) = CellClass::Unwalkable;

  ad::Tape tape;
  auto state = params.goal_net.initial_state(tape);
  ForceOptions opts;
  opts.enable_col = false;
  opts.enable_env = false;
  std::vector<AgentState> others = {other};
  const auto bd =
      net_acceleration(self, Vec2(60, 60), others, grid, params, state, tape, cfg, 7, 19, opts);
  CHECK(bd.f_col == Vec2(0, 0));
  CHECK(bd.f_env == Vec2(0, 0));
  CHECK(bd.total == bd.f_goal);
}
