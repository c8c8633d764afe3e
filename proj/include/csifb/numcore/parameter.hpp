#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csifb/numcore/tensor.hpp"

namespace csifb::numcore {

// Trainable tensor with its gradient and Adam moment estimates.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> adam_m;
  Tensor<T> adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  explicit Parameter(Tensor<T> v)
      : value(std::move(v)),
        grad(value.shape()),
        adam_m(value.shape()),
        adam_v(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }

  template <typename U>
  Parameter<U> cast() const {
    Parameter<U> p(value.template cast<U>());
    p.grad = grad.template cast<U>();
    p.adam_m = adam_m.template cast<U>();
    p.adam_v = adam_v.template cast<U>();
    p.step_count = step_count;
    return p;
  }
};

template <typename T>
struct NamedParam {
  std::string name;
  Parameter<T>* param;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for a fan_in x fan_out matrix.
template <typename T>
Parameter<T> init_matrix(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t = Tensor<T>::matrix(fan_in, fan_out);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return Parameter<T>(std::move(t));
}

template <typename T>
Parameter<T> init_vector(std::size_t n, T fill = T{0}) {
  return Parameter<T>(Tensor<T>::vector(n, fill));
}

}  // namespace csifb::numcore
