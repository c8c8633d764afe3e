#pragma once

#include <span>
#include <vector>

#include "csifb/channel/joint.hpp"
#include "csifb/numcore/tape.hpp"
#include "csifb/numcore/tensor.hpp"

namespace csifb::ablnet {

// |w^H w_hat|^2 / (|w|^2 |w_hat|^2) for one subband given in interleaved real
// form. An all-zero w_hat scores 0; an all-zero w throws InvalidInput.
double sgcs_row(std::span<const float> w, std::span<const float> w_hat);

// Mean of sgcs_row over the k real subbands. Both sides must share k and width.
double sgcs(const channel::JointEigenvector& w, const channel::JointEigenvector& w_hat);

// Taped mean of sgcs_row over every row of `w_hat` against constant rows of `w`.
template <typename T>
numcore::Var<T> sgcs_mean(numcore::Var<T> w_hat, const numcore::Tensor<T>& w);

template <typename T>
struct LossGroup {
  numcore::Var<T> w_hat;
  numcore::Tensor<T> w;
};

// -sum_i mu_i * sgcs_mean(group i). An empty `mu` means equal weights 1/M.
template <typename T>
numcore::Var<T> sgcs_loss(std::span<const LossGroup<T>> groups, std::span<const double> mu = {});

}  // namespace csifb::ablnet
