#ifndef DETECTLAB_TRAIN_CONFIG_HPP
#define DETECTLAB_TRAIN_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "detectlab/optim.hpp"

namespace detectlab {

struct TrainConfig {
  double learning_rate = 2e-5;
  int epochs = 3;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;

  AdamOptions adam() const { return {learning_rate, beta1, beta2, epsilon, clip_norm}; }
  // Throws ValidationError on non-positive learning rate, epochs < 0 or batch size 0.
  void validate() const;
};

struct TrainHistory {
  // Mean training loss per epoch.
  std::vector<double> epoch_loss;
};

}  // namespace detectlab

#endif  // DETECTLAB_TRAIN_CONFIG_HPP
