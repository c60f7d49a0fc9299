#include "detectlab/optim.hpp"

#include <cmath>

#include "detectlab/errors.hpp"

namespace detectlab {

Adam::Adam(std::vector<ad::Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  for (auto* p : params_) {
    m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

double global_grad_norm(const std::vector<ad::Parameter*>& params) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

double Adam::step() {
  const double norm = global_grad_norm(params_);
  const double clip = options_.clip_norm > 0.0 && norm > options_.clip_norm ? options_.clip_norm / norm : 1.0;
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    const ad::Matrix g = p->grad * clip;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    p->value.array() -= options_.learning_rate * (m_[i].array() / c1) /
                        ((v_[i].array() / c2).sqrt() + options_.epsilon);
  }
  zero_grad();
  return norm;
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

}  // namespace detectlab
