#include "detectlab/autograd.hpp"

#include <cmath>

#include "detectlab/errors.hpp"

namespace detectlab::ad {

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::push(Matrix value, std::function<void(Tape&, const Node&)> backprop) {
  if (swept_) throw ContractError("tape already swept; build a new tape for a new pass");
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop)});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix v) { return push(std::move(v), nullptr); }

Var Tape::input(Matrix v) { return push(std::move(v), nullptr); }

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  auto v = push(p.value, nullptr);
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Tape::matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ContractError("matmul shape mismatch");
  const int ia = a.id, ib = b.id;
  return push(a.value() * b.value(), [ia, ib](Tape& t, const Node& n) {
    t.grad_ref(ia).noalias() += n.grad * t.nodes_[ib].value.transpose();
    t.grad_ref(ib).noalias() += t.nodes_[ia].value.transpose() * n.grad;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw ContractError("matmul_nt shape mismatch");
  const int ia = a.id, ib = b.id;
  return push(a.value() * b.value().transpose(), [ia, ib](Tape& t, const Node& n) {
    t.grad_ref(ia).noalias() += n.grad * t.nodes_[ib].value;
    t.grad_ref(ib).noalias() += n.grad.transpose() * t.nodes_[ia].value;
  });
}

Var Tape::add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError("add shape mismatch");
  const int ia = a.id, ib = b.id;
  return push(a.value() + b.value(), [ia, ib](Tape& t, const Node& n) {
    t.grad_ref(ia) += n.grad;
    t.grad_ref(ib) += n.grad;
  });
}

Var Tape::add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row shape mismatch");
  const int ia = a.id, ir = row.id;
  Matrix out = a.value().rowwise() + row.value().row(0);
  return push(std::move(out), [ia, ir](Tape& t, const Node& n) {
    t.grad_ref(ia) += n.grad;
    t.grad_ref(ir) += n.grad.colwise().sum();
  });
}

Var Tape::scale(Var a, double s) {
  const int ia = a.id;
  return push(a.value() * s, [ia, s](Tape& t, const Node& n) { t.grad_ref(ia) += n.grad * s; });
}

Var Tape::tanh(Var a) {
  const int ia = a.id;
  return push(a.value().array().tanh().matrix(), [ia](Tape& t, const Node& n) {
    t.grad_ref(ia).array() += n.grad.array() * (1.0 - n.value.array().square());
  });
}

Var Tape::softmax_rows(Var a) {
  const int ia = a.id;
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return push(std::move(out), [ia](Tape& t, const Node& n) {
    // dx = y * (dy - sum(dy * y))
    const Eigen::VectorXd dot = (n.grad.array() * n.value.array()).rowwise().sum();
    t.grad_ref(ia).array() += n.value.array() * (n.grad.colwise() - dot).array();
  });
}

Var Tape::mean_rows(Var a) {
  const int ia = a.id;
  const double inv = 1.0 / static_cast<double>(a.rows());
  return push(a.value().colwise().mean(), [ia, inv](Tape& t, const Node& n) {
    t.grad_ref(ia).rowwise() += n.grad.row(0) * inv;
  });
}

Var Tape::gather_rows(Var table, std::span<const int> ids) {
  const auto& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) throw ValidationError("token id out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  const int it = table.id;
  std::vector<int> idx(ids.begin(), ids.end());
  return push(std::move(out), [it, idx = std::move(idx)](Tape& t, const Node& n) {
    auto& g = t.grad_ref(it);
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var Tape::l2_normalize(Var a) {
  const double norm = a.value().norm();
  if (!(norm >= 1e-12)) throw DegenerateError("cannot normalize a vector with norm < 1e-12");
  const int ia = a.id;
  return push(a.value() / norm, [ia, norm](Tape& t, const Node& n) {
    // d(x/|x|) = (dy - y <dy, y>) / |x|
    const double proj = (n.grad.array() * n.value.array()).sum();
    t.grad_ref(ia) += (n.grad - n.value * proj) / norm;
  });
}

void Tape::backward(Var out, const Matrix& seed) {
  const std::pair<Var, Matrix> one{out, seed};
  backward(std::span<const std::pair<Var, Matrix>>(&one, 1));
}

void Tape::backward(std::span<const std::pair<Var, Matrix>> seeds) {
  if (swept_) throw ContractError("backward called twice on one tape");
  swept_ = true;
  for (auto& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  int last = -1;
  for (const auto& [v, g] : seeds) {
    if (g.rows() != v.rows() || g.cols() != v.cols()) throw ContractError("seed gradient shape mismatch");
    grad_ref(v.id) += g;
    last = std::max(last, v.id);
  }
  for (int i = last; i >= 0; --i) {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backprop && !n.grad.isZero(0.0)) n.backprop(*this, n);
  }
}

const Matrix& Tape::grad(Var v) const {
  if (!swept_) throw ContractError("gradient requested before backward");
  return nodes_[static_cast<std::size_t>(v.id)].grad;
}

Matrix Tape::param_grad(const Parameter& p) const {
  auto it = param_nodes_.find(&p);
  if (it == param_nodes_.end() || !swept_) return Matrix();
  return nodes_[static_cast<std::size_t>(it->second)].grad;
}

void Tape::accumulate_into(std::span<Parameter* const> params) const {
  if (!swept_) throw ContractError("accumulate_into before backward");
  for (Parameter* p : params) {
    auto it = param_nodes_.find(p);
    if (it == param_nodes_.end()) continue;
    p->grad += nodes_[static_cast<std::size_t>(it->second)].grad;
  }
}

}  // namespace detectlab::ad
