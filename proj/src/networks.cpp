#include "nsp/networks.hpp"

namespace nsp {

using ad::Activation;
using ad::Tape;
using ad::Value;

GoalNetwork::GoalNetwork()
    : state_encoder("goal.state_enc", kStateDim, kEmbedDim, Activation::Relu),
      lstm("goal.lstm", kEmbedDim, kHiddenDim),
      post_lstm_linear("goal.post_lstm", kHiddenDim, kHiddenDim, Activation::Identity),
      goal_embed("goal.goal_enc", 2, kEmbedDim, Activation::Relu) {
  head.emplace_back("goal.head0", kHiddenDim + kEmbedDim, kHeadHidden, Activation::Relu);
  head.emplace_back("goal.head1", kHeadHidden, 1, Activation::Sigmoid);
}

void GoalNetwork::init(std::mt19937_64& rng) {
  ad::init_dense(state_encoder, rng);
  ad::init_lstm(lstm, rng);
  ad::init_dense(post_lstm_linear, rng);
  ad::init_dense(goal_embed, rng);
  for (auto& l : head) ad::init_dense(l, rng);
}

std::vector<ad::Tensor*> GoalNetwork::tensors() {
  std::vector<ad::Tensor*> out = {&state_encoder.weight, &state_encoder.bias,
                                  &lstm.w_i, &lstm.b_i, &lstm.w_f, &lstm.b_f,
                                  &lstm.w_o, &lstm.b_o, &lstm.w_g, &lstm.b_g,
                                  &post_lstm_linear.weight, &post_lstm_linear.bias,
                                  &goal_embed.weight, &goal_embed.bias};
  for (auto& l : head) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

GoalNetwork::State GoalNetwork::initial_state(Tape& tape) const {
  return State{tape.constant(Eigen::MatrixXd::Zero(kHiddenDim, 1)),
               tape.constant(Eigen::MatrixXd::Zero(kHiddenDim, 1))};
}

GoalNetwork::State GoalNetwork::state_from(Tape& tape, const Eigen::MatrixXd& h,
                                           const Eigen::MatrixXd& c) const {
  if (h.rows() != kHiddenDim || h.cols() != 1 || c.rows() != kHiddenDim || c.cols() != 1) {
    throw ad::ShapeMismatch("state_from: carry must be " + std::to_string(kHiddenDim) + "x1");
  }
  return State{tape.constant(h), tape.constant(c)};
}

CollisionNetwork::CollisionNetwork()
    : self_encoder("col.self_enc", kStateDim, kEmbedDim, Activation::Relu),
      neighbor_encoder("col.neigh_enc", kStateDim, kEmbedDim, Activation::Relu) {
  head.emplace_back("col.head0", 2 * kEmbedDim, kHeadHidden, Activation::Relu);
  head.emplace_back("col.head1", kHeadHidden, 1, Activation::Sigmoid);
}

void CollisionNetwork::init(std::mt19937_64& rng) {
  ad::init_dense(self_encoder, rng);
  ad::init_dense(neighbor_encoder, rng);
  for (auto& l : head) ad::init_dense(l, rng);
}

std::vector<ad::Tensor*> CollisionNetwork::tensors() {
  std::vector<ad::Tensor*> out = {&self_encoder.weight, &self_encoder.bias,
                                  &neighbor_encoder.weight, &neighbor_encoder.bias};
  for (auto& l : head) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Value state_input(Tape& tape, const AgentState& q) {
  Eigen::MatrixXd m(4, 1);
  m << q.p.x(), q.p.y(), q.v.x(), q.v.y();
  return tape.constant(m);
}

void goal_ingest(Tape& tape, const GoalNetwork& net, GoalNetwork::State& state, Value q) {
  if (!state.h.valid() || !state.c.valid() || state.h.tape != &tape || state.c.tape != &tape) {
    throw UninitializedState("goal network: recurrent state not initialized on this tape");
  }
  Value e = net.state_encoder.forward(tape, ad::scale(q, net.input_scale));
  auto carry = net.lstm.step(tape, e, state.h, state.c);
  state.h = carry.h;
  state.c = carry.c;
}

Value goal_tau(Tape& tape, const GoalNetwork& net, GoalNetwork::State& state, Value q, Value p_goal,
               const NspConfig& cfg) {
  goal_ingest(tape, net, state, q);
  Value u = net.post_lstm_linear.forward(tape, state.h);
  Value g = net.goal_embed.forward(tape, ad::scale(p_goal, net.input_scale));
  Value y = ad::mlp_forward(tape, net.head, ad::concat(u, g));
  return ad::add(ad::scale(y, cfg.a_tau), tape.scalar_constant(cfg.b_tau));
}

Value goal_tau(Tape& tape, const GoalNetwork& net, GoalNetwork::State& state, const AgentState& q,
               const Vec2& p_goal, const NspConfig& cfg) {
  return goal_tau(tape, net, state, state_input(tape, q), tape.constant(p_goal), cfg);
}

Value collision_k(Tape& tape, const CollisionNetwork& net, Value q_self, Value q_neighbor,
                  const NspConfig& cfg) {
  Value s = net.self_encoder.forward(tape, ad::scale(q_self, net.input_scale));
  Value n = net.neighbor_encoder.forward(tape, ad::scale(q_neighbor, net.input_scale));
  Value y = ad::mlp_forward(tape, net.head, ad::concat(s, n));
  return ad::add(ad::scale(y, cfg.a_k), tape.scalar_constant(cfg.b_k));
}

Value collision_k(Tape& tape, const CollisionNetwork& net, const AgentState& q_self,
                  const AgentState& q_neighbor, const NspConfig& cfg) {
  return collision_k(tape, net, state_input(tape, q_self), state_input(tape, q_neighbor), cfg);
}

}  // namespace nsp
