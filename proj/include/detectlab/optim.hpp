#ifndef DETECTLAB_OPTIM_HPP
#define DETECTLAB_OPTIM_HPP

#include <vector>

#include "detectlab/autograd.hpp"

namespace detectlab {

struct AdamOptions {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 1.0;
};

// Adam over a fixed parameter list. step() consumes and zeroes the gradients.
class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, AdamOptions options);

  // Returns the pre-clip global gradient norm.
  double step();
  void zero_grad();
  long steps_taken() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  AdamOptions options_;
  std::vector<ad::Matrix> m_, v_;
  long t_ = 0;
};

double global_grad_norm(const std::vector<ad::Parameter*>& params);

}  // namespace detectlab

#endif  // DETECTLAB_OPTIM_HPP
