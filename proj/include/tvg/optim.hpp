#ifndef TVG_OPTIM_HPP
#define TVG_OPTIM_HPP

#include <vector>

#include "tvg/autodiff.hpp"

namespace tvg {

// Adam with decoupled weight decay. One instance owns the moment state for a
// fixed parameter list; step() consumes the gradients currently populated on
// those parameters.
class AdamW {
 public:
  struct Options {
    double learning_rate = 8e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
  };

  AdamW(std::vector<Var> params, Options opts);

  void step();
  void zero_grad();

  const Options& options() const { return opts_; }
  void set_learning_rate(double lr) { opts_.learning_rate = lr; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  Options opts_;
  long step_count_ = 0;
};

}  // namespace tvg

#endif  // TVG_OPTIM_HPP
