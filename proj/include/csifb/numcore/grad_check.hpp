#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "csifb/numcore/tape.hpp"
#include "csifb/numcore/tensor.hpp"

namespace csifb::numcore {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients against central finite differences.
//
// `f` is a generic callable `f(Tape<T>&, std::span<const Var<T>>) -> Var<T>`
// returning a scalar; it is instantiated once with AnalyticT (gradients via
// backward) and once with double (finite differences). Relative error per
// element is |a - n| / max(1e-6, |a| + |n|).
template <typename AnalyticT = float, typename F>
GradCheckReport grad_check(F&& f, const std::vector<Tensor<double>>& leaves, double eps = 1e-3) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<AnalyticT> tape;
    std::vector<Var<AnalyticT>> vars;
    vars.reserve(leaves.size());
    for (const auto& l : leaves) vars.push_back(tape.variable(l.template cast<AnalyticT>()));
    Var<AnalyticT> loss = f(tape, std::span<const Var<AnalyticT>>(vars));
    tape.backward(loss);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      analytic.push_back(tape.has_grad(vars[i]) ? tape.grad(vars[i]).template cast<double>()
                                                : Tensor<double>(leaves[i].shape()));
    }
  }

  auto evaluate = [&](const std::vector<Tensor<double>>& point) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(point.size());
    for (const auto& l : point) vars.push_back(tape.constant(l));
    return tape.value(f(tape, std::span<const Var<double>>(vars)))[0];
  };

  GradCheckReport report;
  std::vector<Tensor<double>> point = leaves;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (std::size_t i = 0; i < leaves[li].size(); ++i) {
      const double orig = point[li][i];
      point[li][i] = orig + eps;
      const double up = evaluate(point);
      point[li][i] = orig - eps;
      const double down = evaluate(point);
      point[li][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[li][i];
      const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      ++report.checked;
      if (rel > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = rel;
        report.worst_leaf = li;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace csifb::numcore
