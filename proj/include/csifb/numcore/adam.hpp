#pragma once

#include <cmath>

#include "csifb/numcore/parameter.hpp"

namespace csifb::numcore {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update per parameter, then zeroes the gradients.
// A parameter whose gradient is entirely zero is left untouched (value, moments
// and step count), so a step with no gradient signal is an exact identity.
template <typename T>
void adam_step(const ParamList<T>& params, const AdamConfig& cfg) {
  for (const auto& np : params) {
    Parameter<T>& p = *np.param;
    bool any = false;
    for (T g : p.grad.storage()) {
      if (g != T{0}) {
        any = true;
        break;
      }
    }
    if (!any) continue;
    ++p.step_count;
    const double t = static_cast<double>(p.step_count);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      p.adam_m[i] = b1 * p.adam_m[i] + (T{1} - b1) * g;
      p.adam_v[i] = b2 * p.adam_v[i] + (T{1} - b2) * g * g;
      const double mhat = static_cast<double>(p.adam_m[i]) / c1;
      const double vhat = static_cast<double>(p.adam_v[i]) / c2;
      p.value[i] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
    p.zero_grad();
  }
}

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (const auto& np : params) np.param->zero_grad();
}

}  // namespace csifb::numcore
