#include "nsp/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace nsp::ad {

const Eigen::MatrixXd& Value::m() const {
  return tape->data(idx);
}

double Value::scalar() const {
  const Eigen::MatrixXd& d = m();
  if (d.size() != 1) {
    throw NonScalarOutput("scalar() on a " + std::to_string(d.rows()) + "x" + std::to_string(d.cols()) +
                          " node");
  }
  return d(0, 0);
}

int Tape::emplace(Eigen::MatrixXd data, std::function<void(Tape&)> back) {
  Node n;
  n.grad = Eigen::MatrixXd::Zero(data.rows(), data.cols());
  n.data = std::move(data);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::scalar_constant(double s) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = s;
  return Value{this, emplace(std::move(m), nullptr)};
}

Value Tape::leaf(Tensor& t) {
  Tensor* tp = &t;
  const int self = static_cast<int>(nodes_.size());
  emplace(t.data, [tp, self](Tape& tape) { tp->grad += tape.nodes_[self].grad; });
  return Value{this, self};
}

void Tape::backward(Value out) {
  if (out.tape != this) throw Error("backward: value belongs to a different tape");
  if (nodes_[out.idx].data.size() != 1) throw NonScalarOutput("backward requires a scalar output");
  for (int i = 0; i <= out.idx; ++i) nodes_[i].grad.setZero();
  nodes_[out.idx].grad(0, 0) = 1.0;
  for (int i = out.idx; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

void Tape::clear() {
  nodes_.clear();
}

namespace {

Tape& same_tape(Value a, Value b) {
  if (a.tape != b.tape) throw Error("operands live on different tapes");
  return *a.tape;
}

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

void require_scalar(const Eigen::MatrixXd& s, const char* op) {
  if (s.size() != 1) throw ShapeMismatch(std::string(op) + ": expected a 1x1 scalar node");
}

// Creates a node whose backward lambda knows its own index.
template <typename BackFactory>
Value make_node(Tape& t, Eigen::MatrixXd data, BackFactory&& factory) {
  const int self = static_cast<int>(t.size());
  t.emplace(std::move(data), factory(self));
  return Value{&t, self};
}

}  // namespace

Value matmul(Value a, Value x) {
  Tape& t = same_tape(a, x);
  const Eigen::MatrixXd& A = a.m();
  const Eigen::MatrixXd& X = x.m();
  if (A.cols() != X.rows()) {
    throw ShapeMismatch("matmul: " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) + " * " +
                        std::to_string(X.rows()) + "x" + std::to_string(X.cols()));
  }
  const int ia = a.idx, ix = x.idx;
  return make_node(t, A * X, [ia, ix](int self) {
    return [ia, ix, self](Tape& tp) {
      const Eigen::MatrixXd& g = tp.grad(self);
      tp.grad(ia) += g * tp.data(ix).transpose();
      tp.grad(ix) += tp.data(ia).transpose() * g;
    };
  });
}

Value add(Value a, Value b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.m(), b.m(), "add");
  const int ia = a.idx, ib = b.idx;
  return make_node(t, a.m() + b.m(), [ia, ib](int self) {
    return [ia, ib, self](Tape& tp) {
      tp.grad(ia) += tp.grad(self);
      tp.grad(ib) += tp.grad(self);
    };
  });
}

Value sub(Value a, Value b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.m(), b.m(), "sub");
  const int ia = a.idx, ib = b.idx;
  return make_node(t, a.m() - b.m(), [ia, ib](int self) {
    return [ia, ib, self](Tape& tp) {
      tp.grad(ia) += tp.grad(self);
      tp.grad(ib) -= tp.grad(self);
    };
  });
}

Value scale(Value a, double c) {
  Tape& t = *a.tape;
  const int ia = a.idx;
  return make_node(t, c * a.m(), [ia, c](int self) {
    return [ia, c, self](Tape& tp) { tp.grad(ia) += c * tp.grad(self); };
  });
}

Value hadamard(Value a, Value b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.m(), b.m(), "hadamard");
  const int ia = a.idx, ib = b.idx;
  return make_node(t, a.m().cwiseProduct(b.m()), [ia, ib](int self) {
    return [ia, ib, self](Tape& tp) {
      tp.grad(ia) += tp.grad(self).cwiseProduct(tp.data(ib));
      tp.grad(ib) += tp.grad(self).cwiseProduct(tp.data(ia));
    };
  });
}

Value relu(Value a) {
  Tape& t = *a.tape;
  const int ia = a.idx;
  return make_node(t, a.m().cwiseMax(0.0), [ia](int self) {
    return [ia, self](Tape& tp) {
      tp.grad(ia) += tp.grad(self).cwiseProduct(
          (tp.data(ia).array() > 0.0).cast<double>().matrix());
    };
  });
}

Value sigmoid(Value a) {
  Tape& t = *a.tape;
  const int ia = a.idx;
  Eigen::MatrixXd y = (1.0 / (1.0 + (-a.m().array()).exp())).matrix();
  return make_node(t, std::move(y), [ia](int self) {
    return [ia, self](Tape& tp) {
      const auto& y = tp.data(self).array();
      tp.grad(ia) += (tp.grad(self).array() * y * (1.0 - y)).matrix();
    };
  });
}

Value tanh_(Value a) {
  Tape& t = *a.tape;
  const int ia = a.idx;
  return make_node(t, a.m().array().tanh().matrix(), [ia](int self) {
    return [ia, self](Tape& tp) {
      const auto& y = tp.data(self).array();
      tp.grad(ia) += (tp.grad(self).array() * (1.0 - y * y)).matrix();
    };
  });
}

Value exp_(Value a) {
  Tape& t = *a.tape;
  const int ia = a.idx;
  return make_node(t, a.m().array().exp().matrix(), [ia](int self) {
    return [ia, self](Tape& tp) {
      tp.grad(ia) += tp.grad(self).cwiseProduct(tp.data(self));
    };
  });
}

Value concat(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Eigen::MatrixXd& A = a.m();
  const Eigen::MatrixXd& B = b.m();
  if (A.cols() != 1 || B.cols() != 1) throw ShapeMismatch("concat expects column vectors");
  Eigen::MatrixXd out(A.rows() + B.rows(), 1);
  out << A, B;
  const int ia = a.idx, ib = b.idx;
  const int na = static_cast<int>(A.rows());
  const int nb = static_cast<int>(B.rows());
  return make_node(t, std::move(out), [ia, ib, na, nb](int self) {
    return [ia, ib, na, nb, self](Tape& tp) {
      tp.grad(ia) += tp.grad(self).topRows(na);
      tp.grad(ib) += tp.grad(self).bottomRows(nb);
    };
  });
}

Value slice(Value a, int start_row, int n_rows) {
  Tape& t = *a.tape;
  const Eigen::MatrixXd& A = a.m();
  if (A.cols() != 1 || start_row < 0 || n_rows <= 0 || start_row + n_rows > A.rows()) {
    throw ShapeMismatch("slice: rows [" + std::to_string(start_row) + ", " +
                        std::to_string(start_row + n_rows) + ") of a " + std::to_string(A.rows()) +
                        "-vector");
  }
  const int ia = a.idx;
  return make_node(t, A.middleRows(start_row, n_rows), [ia, start_row, n_rows](int self) {
    return [ia, start_row, n_rows, self](Tape& tp) {
      tp.grad(ia).middleRows(start_row, n_rows) += tp.grad(self);
    };
  });
}

Value sum(Value a) {
  Tape& t = *a.tape;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.m().sum();
  const int ia = a.idx;
  return make_node(t, std::move(out), [ia](int self) {
    return [ia, self](Tape& tp) {
      tp.grad(ia).array() += tp.grad(self)(0, 0);
    };
  });
}

Value sum_sq(Value a) {
  Tape& t = *a.tape;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.m().squaredNorm();
  const int ia = a.idx;
  return make_node(t, std::move(out), [ia](int self) {
    return [ia, self](Tape& tp) {
      tp.grad(ia) += 2.0 * tp.grad(self)(0, 0) * tp.data(ia);
    };
  });
}

Value norm(Value a) {
  Tape& t = *a.tape;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.m().norm();
  const int ia = a.idx;
  return make_node(t, std::move(out), [ia](int self) {
    return [ia, self](Tape& tp) {
      const double n = tp.data(self)(0, 0);
      tp.grad(ia) += (tp.grad(self)(0, 0) / n) * tp.data(ia);
    };
  });
}

Value dot(Value a, Value b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.m(), b.m(), "dot");
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.m().cwiseProduct(b.m()).sum();
  const int ia = a.idx, ib = b.idx;
  return make_node(t, std::move(out), [ia, ib](int self) {
    return [ia, ib, self](Tape& tp) {
      const double g = tp.grad(self)(0, 0);
      tp.grad(ia) += g * tp.data(ib);
      tp.grad(ib) += g * tp.data(ia);
    };
  });
}

Value smul(Value a, Value s) {
  Tape& t = same_tape(a, s);
  require_scalar(s.m(), "smul");
  const double sv = s.m()(0, 0);
  const int ia = a.idx, is = s.idx;
  return make_node(t, sv * a.m(), [ia, is](int self) {
    return [ia, is, self](Tape& tp) {
      const double sv = tp.data(is)(0, 0);
      tp.grad(ia) += sv * tp.grad(self);
      tp.grad(is)(0, 0) += tp.grad(self).cwiseProduct(tp.data(ia)).sum();
    };
  });
}

Value sdiv(Value a, Value s) {
  Tape& t = same_tape(a, s);
  require_scalar(s.m(), "sdiv");
  const double sv = s.m()(0, 0);
  const int ia = a.idx, is = s.idx;
  return make_node(t, a.m() / sv, [ia, is](int self) {
    return [ia, is, self](Tape& tp) {
      const double sv = tp.data(is)(0, 0);
      tp.grad(ia) += tp.grad(self) / sv;
      tp.grad(is)(0, 0) -= tp.grad(self).cwiseProduct(tp.data(ia)).sum() / (sv * sv);
    };
  });
}

Value DenseLayer::forward(Tape& tape, Value x) const {
  // Parameter tensors are mutated only through their grad during backward;
  // the const_cast keeps forward() usable from const network objects.
  Value w = tape.leaf(const_cast<Tensor&>(weight));
  Value b = tape.leaf(const_cast<Tensor&>(bias));
  Value z = add(matmul(w, x), b);
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Relu: return relu(z);
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Tanh: return tanh_(z);
  }
  throw Error("unknown activation");
}

Value mlp_forward(Tape& tape, std::span<const DenseLayer> layers, Value x) {
  Value h = x;
  for (const DenseLayer& layer : layers) {
    if (h.m().rows() != layer.in_dim()) {
      throw ShapeMismatch("mlp_forward: input of size " + std::to_string(h.m().rows()) +
                          " into layer expecting " + std::to_string(layer.in_dim()));
    }
    h = layer.forward(tape, h);
  }
  return h;
}

LstmCell::LstmCell(const std::string& name, int in, int hidden)
    : w_i(name + ".w_i", hidden, hidden + in),
      b_i(name + ".b_i", hidden, 1),
      w_f(name + ".w_f", hidden, hidden + in),
      b_f(name + ".b_f", hidden, 1),
      w_o(name + ".w_o", hidden, hidden + in),
      b_o(name + ".b_o", hidden, 1),
      w_g(name + ".w_g", hidden, hidden + in),
      b_g(name + ".b_g", hidden, 1),
      input_dim(in),
      hidden_dim(hidden) {}

LstmCell::Out LstmCell::step(Tape& tape, Value x, Value h, Value c) const {
  if (x.m().rows() != input_dim || h.m().rows() != hidden_dim || c.m().rows() != hidden_dim) {
    throw ShapeMismatch("lstm_step: expected input " + std::to_string(input_dim) + ", hidden " +
                        std::to_string(hidden_dim));
  }
  Value z = concat(x, h);
  auto gate = [&](const Tensor& w, const Tensor& b, bool is_tanh) {
    Value pre = add(matmul(tape.leaf(const_cast<Tensor&>(w)), z), tape.leaf(const_cast<Tensor&>(b)));
    return is_tanh ? tanh_(pre) : sigmoid(pre);
  };
  Value i = gate(w_i, b_i, false);
  Value f = gate(w_f, b_f, false);
  Value o = gate(w_o, b_o, false);
  Value g = gate(w_g, b_g, true);
  Value c_next = add(hadamard(f, c), hadamard(i, g));
  Value h_next = hadamard(o, tanh_(c_next));
  return Out{h_next, c_next};
}

void xavier_init(Tensor& t, std::mt19937_64& rng) {
  const double fan = static_cast<double>(t.data.rows() + t.data.cols());
  const double bound = std::sqrt(6.0 / fan);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < t.data.cols(); ++j) {
    for (Eigen::Index i = 0; i < t.data.rows(); ++i) t.data(i, j) = dist(rng);
  }
}

void init_dense(DenseLayer& layer, std::mt19937_64& rng) {
  xavier_init(layer.weight, rng);
  layer.bias.data.setZero();
}

void init_lstm(LstmCell& cell, std::mt19937_64& rng) {
  xavier_init(cell.w_i, rng);
  xavier_init(cell.w_f, rng);
  xavier_init(cell.w_o, rng);
  xavier_init(cell.w_g, rng);
  cell.b_i.data.setZero();
  cell.b_f.data.setZero();
  cell.b_o.data.setZero();
  cell.b_g.data.setZero();
}

double grad_check(const std::function<Value(Tape&)>& build, std::span<Tensor* const> params,
                  double eps, double abs_floor) {
  for (Tensor* p : params) p->zero_grad();
  {
    Tape tape;
    Value out = build(tape);
    tape.backward(out);
  }
  std::vector<Eigen::MatrixXd> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Tape tape;
    return build(tape).scalar();
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& t = *params[k];
    for (Eigen::Index j = 0; j < t.data.cols(); ++j) {
      for (Eigen::Index i = 0; i < t.data.rows(); ++i) {
        const double saved = t.data(i, j);
        t.data(i, j) = saved + eps;
        const double up = eval();
        t.data(i, j) = saved - eps;
        const double down = eval();
        t.data(i, j) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[k](i, j);
        if (std::abs(a - numeric) < abs_floor) continue;
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
        if (err > worst) worst = err;
      }
    }
  }
  for (Tensor* p : params) p->zero_grad();
  return worst;
}

}  // namespace nsp::ad
