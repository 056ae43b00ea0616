#pragma once

#include "nsp/autodiff.hpp"
#include "nsp/types.hpp"

#include <random>
#include <vector>

namespace nsp {

struct UninitializedState : Error {
  using Error::Error;
};

// tau producer: state encoder feeding an LSTM, a goal embedding, and a joint
// head ending in sigmoid so that tau = a_tau * head + b_tau stays in
// (b_tau, a_tau + b_tau).
struct GoalNetwork {
  static constexpr int kStateDim = 4;   // [p; v]
  static constexpr int kEmbedDim = 16;
  static constexpr int kHiddenDim = 32;
  static constexpr int kHeadHidden = 64;

  ad::DenseLayer state_encoder;
  ad::LstmCell lstm;
  ad::DenseLayer post_lstm_linear;
  ad::DenseLayer goal_embed;
  std::vector<ad::DenseLayer> head;
  double input_scale = 0.01;  // pixel coordinates into O(1) network range

  GoalNetwork();
  void init(std::mt19937_64& rng);
  std::vector<ad::Tensor*> tensors();

  // Recurrent carry for one agent within one window; lives on a tape.
  struct State {
    ad::Value h;
    ad::Value c;
  };
  State initial_state(ad::Tape& tape) const;
  State state_from(ad::Tape& tape, const Eigen::MatrixXd& h, const Eigen::MatrixXd& c) const;
};

// Pairwise repulsion strength k_nj = a_k * sigmoid(head(self, neighbor)) + b_k.
struct CollisionNetwork {
  static constexpr int kStateDim = 4;
  static constexpr int kEmbedDim = 16;
  static constexpr int kHeadHidden = 64;

  ad::DenseLayer self_encoder;
  ad::DenseLayer neighbor_encoder;
  std::vector<ad::DenseLayer> head;
  double input_scale = 0.01;

  CollisionNetwork();
  void init(std::mt19937_64& rng);
  std::vector<ad::Tensor*> tensors();
};

// [p; v] as a 4x1 graph constant.
ad::Value state_input(ad::Tape& tape, const AgentState& q);

// Feeds one state through the encoder and LSTM, advancing the recurrent
// state without evaluating the head. Used for observed-frame warm-up.
void goal_ingest(ad::Tape& tape, const GoalNetwork& net, GoalNetwork::State& state, ad::Value q);

// Advances the recurrent state and returns tau on the tape. q is the raw 4x1
// state [p; v] in pixels, p_goal the raw 2x1 goal; scaling happens inside.
ad::Value goal_tau(ad::Tape& tape, const GoalNetwork& net, GoalNetwork::State& state, ad::Value q,
                   ad::Value p_goal, const NspConfig& cfg);
ad::Value goal_tau(ad::Tape& tape, const GoalNetwork& net, GoalNetwork::State& state,
                   const AgentState& q, const Vec2& p_goal, const NspConfig& cfg);

ad::Value collision_k(ad::Tape& tape, const CollisionNetwork& net, ad::Value q_self,
                      ad::Value q_neighbor, const NspConfig& cfg);
ad::Value collision_k(ad::Tape& tape, const CollisionNetwork& net, const AgentState& q_self,
                      const AgentState& q_neighbor, const NspConfig& cfg);

}  // namespace nsp
