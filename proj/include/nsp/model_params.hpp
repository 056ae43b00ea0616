#pragma once

#include "nsp/cvae.hpp"
#include "nsp/networks.hpp"

#include <random>
#include <vector>

namespace nsp {

// Every learnable quantity of the model. Default construction gives zero
// network weights and k_env = 1.
struct ModelParams {
  GoalNetwork goal_net;
  CollisionNetwork collision_net;
  ad::Tensor k_env;
  CvaeModel cvae;

  ModelParams() : k_env("k_env", 1, 1) { k_env.data(0, 0) = 1.0; }

  void init(std::mt19937_64& rng) {
    goal_net.init(rng);
    collision_net.init(rng);
    cvae.init(rng);
  }

  std::vector<ad::Tensor*> all_tensors() {
    std::vector<ad::Tensor*> out = goal_net.tensors();
    for (auto* t : collision_net.tensors()) out.push_back(t);
    out.push_back(&k_env);
    for (auto* t : cvae.tensors()) out.push_back(t);
    return out;
  }
};

}  // namespace nsp
