#ifndef DETECTLAB_AUTOGRAD_HPP
#define DETECTLAB_AUTOGRAD_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace detectlab::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// A named trainable tensor. Gradients accumulate into `grad` between optimizer steps.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over dense double matrices. Activations are row-major
// in the sense that each token is a row. One tape per forward pass; a tape
// is not shared across threads.
class Tape {
 public:
  Var constant(Matrix v);
  // Differentiable input whose gradient can be read back with grad().
  Var input(Matrix v);
  // Binds a parameter. Repeated binds of the same parameter reuse one node.
  Var param(const Parameter& p);

  Var matmul(Var a, Var b);
  // a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  // Adds a 1 x n row to every row of a.
  Var add_row(Var a, Var row);
  Var scale(Var a, double s);
  Var tanh(Var a);
  Var softmax_rows(Var a);
  // Column-wise mean over rows: (T x d) -> (1 x d).
  Var mean_rows(Var a);
  // Selects rows of a table by id; gradient scatters back into the table.
  Var gather_rows(Var table, std::span<const int> ids);
  // Divides by the Frobenius norm. Throws DegenerateError below 1e-12.
  Var l2_normalize(Var a);

  // Seeds d(loss)/d(output) for each listed output and runs one reverse sweep.
  void backward(std::span<const std::pair<Var, Matrix>> seeds);
  void backward(Var out, const Matrix& seed);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Matrix& grad(Var v) const;
  // Gradient of the bound parameter, or an empty matrix when it was never bound.
  Matrix param_grad(const Parameter& p) const;
  // Adds this tape's gradients into each parameter's grad field.
  void accumulate_into(std::span<Parameter* const> params) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, const Node&)> backprop;
  };

  Var push(Matrix value, std::function<void(Tape&, const Node&)> backprop);
  Matrix& grad_ref(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool swept_ = false;
};

}  // namespace detectlab::ad

#endif  // DETECTLAB_AUTOGRAD_HPP
