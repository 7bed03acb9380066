#pragma once

#include <vector>

#include "cpfd/tensor.hpp"

namespace cpfd {

// Adam with bias correction. One optimizer owns one parameter set; moment
// state lives here, keyed by parameter order.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Tensor> params, double lr = 4e-4,
                         double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);

  // Applies one update from the accumulated gradients. Throws if any gradient
  // is not finite; parameters are left untouched in that case.
  void step();
  void zero_grad();

  double learning_rate() const { return lr_; }
  long steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace cpfd
