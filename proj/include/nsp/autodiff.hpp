#pragma once

#include "nsp/types.hpp"

#include <Eigen/Core>

#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace nsp::ad {

struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonScalarOutput : Error {
  using Error::Error;
};

// Named learnable array with an accumulated gradient of the same shape.
struct Tensor {
  std::string name;
  Eigen::MatrixXd data;
  Eigen::MatrixXd grad;

  Tensor() = default;
  Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), data(Eigen::MatrixXd::Zero(rows, cols)), grad(Eigen::MatrixXd::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return data.size(); }
};

class Tape;

// Handle to one node of a computation graph.
struct Value {
  Tape* tape = nullptr;
  int idx = -1;

  bool valid() const { return tape != nullptr && idx >= 0; }
  const Eigen::MatrixXd& m() const;
  double scalar() const;
  Eigen::Index rows() const { return m().rows(); }
};

// Append-only computation graph. Node creation order is a topological order,
// so the backward pass is a single reverse sweep; gradients are deterministic
// for a fixed graph.
class Tape {
 public:
  template <typename Derived>
  Value constant(const Eigen::MatrixBase<Derived>& m) {
    Eigen::MatrixXd data = m;
    return Value{this, emplace(std::move(data), nullptr)};
  }
  Value scalar_constant(double s);
  Value leaf(Tensor& t);

  // Seeds d(out)/d(out) = 1 and accumulates grads into every reachable
  // parameter tensor. Throws NonScalarOutput unless out is 1x1.
  void backward(Value out);

  void clear();
  std::size_t size() const { return nodes_.size(); }

  const Eigen::MatrixXd& data(int idx) const { return nodes_[idx].data; }
  Eigen::MatrixXd& grad(int idx) { return nodes_[idx].grad; }

  int emplace(Eigen::MatrixXd data, std::function<void(Tape&)> back);

 private:
  struct Node {
    Eigen::MatrixXd data;
    Eigen::MatrixXd grad;
    std::function<void(Tape&)> back;  // null for constants and leaves without tensors
  };
  std::deque<Node> nodes_;
};

// --- elementwise and linear ops ------------------------------------------

Value matmul(Value a, Value x);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value scale(Value a, double c);
Value hadamard(Value a, Value b);
Value relu(Value a);
Value sigmoid(Value a);
Value tanh_(Value a);
Value exp_(Value a);
Value concat(Value a, Value b);
Value slice(Value a, int start_row, int n_rows);  // rows [start, start+n) of a column vector

// --- reductions and scalar-node arithmetic --------------------------------

Value sum(Value a);
Value sum_sq(Value a);   // ||a||^2 as a 1x1 node
Value norm(Value a);     // ||a||, callers must keep a away from zero
Value dot(Value a, Value b);
Value smul(Value a, Value s);  // a * s, s a 1x1 node
Value sdiv(Value a, Value s);  // a / s, s a 1x1 node

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(double c, Value a) { return scale(a, c); }

// --- layers ----------------------------------------------------------------

enum class Activation { Identity, Relu, Sigmoid, Tanh };

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out x 1
  Activation act = Activation::Identity;

  DenseLayer() = default;
  DenseLayer(const std::string& name, int in, int out, Activation a)
      : weight(name + ".weight", out, in), bias(name + ".bias", out, 1), act(a) {}

  int in_dim() const { return static_cast<int>(weight.data.cols()); }
  int out_dim() const { return static_cast<int>(weight.data.rows()); }
  Value forward(Tape& tape, Value x) const;
};

Value mlp_forward(Tape& tape, std::span<const DenseLayer> layers, Value x);

// Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate.
struct LstmCell {
  Tensor w_i, b_i;
  Tensor w_f, b_f;
  Tensor w_o, b_o;
  Tensor w_g, b_g;
  int input_dim = 0;
  int hidden_dim = 0;

  LstmCell() = default;
  LstmCell(const std::string& name, int in, int hidden);

  struct Out {
    Value h;
    Value c;
  };
  Out step(Tape& tape, Value x, Value h, Value c) const;
};

// --- initialization and checking ------------------------------------------

void xavier_init(Tensor& t, std::mt19937_64& rng);
void init_dense(DenseLayer& layer, std::mt19937_64& rng);
void init_lstm(LstmCell& cell, std::mt19937_64& rng);

// Max over all parameter entries of the relative disagreement between the
// analytic gradient and a central finite difference of the rebuilt forward.
// `build` must construct the same scalar graph from the current parameter
// values on every call. Entries whose absolute disagreement stays below
// abs_floor are skipped: near-zero gradients drown in the O(|f| eps^-1 ulp)
// noise of the difference quotient and their relative error means nothing.
double grad_check(const std::function<Value(Tape&)>& build, std::span<Tensor* const> params,
                  double eps, double abs_floor = 0.0);

}  // namespace nsp::ad
