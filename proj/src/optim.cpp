#include "radfiner/optim.hpp"

#include <cmath>

#include "radfiner/error.hpp"

namespace radfiner::nn {

void AdamW::step(std::span<Param* const> params) {
  ++t_;
  const auto& o = options_;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    if (p->grad.shape() != p->value.shape()) throw ShapeError("adamw: gradient shape mismatch for " + p->name);
    auto [it, fresh] = moments_.try_emplace(p->name);
    if (fresh) {
      it->second.m = Tensor::zeros_like(p->value);
      it->second.v = Tensor::zeros_like(p->value);
    }
    auto& mo = it->second;
    if (mo.m.shape() != p->value.shape()) throw ShapeError("adamw: moment shape mismatch for " + p->name);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->value[i] *= 1.0 - o.lr * o.weight_decay;
      mo.m[i] = o.beta1 * mo.m[i] + (1.0 - o.beta1) * g;
      mo.v[i] = o.beta2 * mo.v[i] + (1.0 - o.beta2) * g * g;
      const double m_hat = mo.m[i] / bc1;
      const double v_hat = mo.v[i] / bc2;
      p->value[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
    p->zero_grad();
  }
}

}  // namespace radfiner::nn
