#include "tvg/optim.hpp"

#include <cmath>

#include "tvg/errors.hpp"

namespace tvg {

AdamW::AdamW(std::vector<Var> params, Options opts) : params_(std::move(params)), opts_(opts) {
  if (!(opts_.learning_rate > 0.0)) throw ContractError("adamw: learning rate must be > 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Var& p : params_) {
    if (!p.requires_grad()) throw ContractError("adamw: parameter without gradient tracking");
    m_.emplace_back(p.value().shape());
    v_.emplace_back(p.value().shape());
  }
}

void AdamW::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, step_count_);
  const double bc2 = 1.0 - std::pow(opts_.beta2, step_count_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (!p.has_grad()) throw ContractError("adamw: missing grad on parameter");
    const Tensor& g = p.grad();
    Tensor& value = p.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int j = 0; j < value.numel(); ++j) {
      m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * g[j];
      v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      value[j] -= opts_.learning_rate *
                  (m_hat / (std::sqrt(v_hat) + opts_.epsilon) + opts_.weight_decay * value[j]);
    }
  }
}

void AdamW::zero_grad() {
  for (Var& p : params_) p.zero_grad();
}

}  // namespace tvg
