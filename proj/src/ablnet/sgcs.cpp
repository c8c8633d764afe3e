#include "csifb/ablnet/sgcs.hpp"

#include <optional>
#include <string>

#include "csifb/errors.hpp"
#include "csifb/numcore/ops.hpp"

namespace csifb::ablnet {

using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

namespace {

// Real and imaginary parts of w^H v plus both squared norms, for interleaved rows.
struct RowTerms {
  double re = 0, im = 0, ww = 0, vv = 0;
};

template <typename A, typename B>
RowTerms row_terms(const A* w, const B* v, std::size_t width) {
  RowTerms t;
  for (std::size_t j = 0; j + 1 < width; j += 2) {
    const double wr = w[j], wi = w[j + 1], vr = v[j], vi = v[j + 1];
    t.re += wr * vr + wi * vi;
    t.im += wr * vi - wi * vr;
    t.ww += wr * wr + wi * wi;
    t.vv += vr * vr + vi * vi;
  }
  return t;
}

}  // namespace

double sgcs_row(std::span<const float> w, std::span<const float> w_hat) {
  if (w.size() != w_hat.size() || w.size() % 2 != 0) {
    throw DimensionError("sgcs rows must have equal even widths");
  }
  const RowTerms t = row_terms(w.data(), w_hat.data(), w.size());
  if (t.ww == 0.0) throw InvalidInput("reference eigenvector row is zero");
  if (t.vv == 0.0) return 0.0;
  // Rounding can push a perfect match a hair above 1; NaN passes through.
  const double s = (t.re * t.re + t.im * t.im) / (t.ww * t.vv);
  return s > 1.0 ? 1.0 : s;
}

double sgcs(const channel::JointEigenvector& w, const channel::JointEigenvector& w_hat) {
  if (w.k != w_hat.k) {
    throw DimensionError("sgcs subband counts differ: " + std::to_string(w.k) + " vs " +
                         std::to_string(w_hat.k));
  }
  if (w.width() != w_hat.width()) throw DimensionError("sgcs widths differ");
  if (w.k == 0) throw InvalidInput("sgcs of an empty eigenvector");
  double total = 0.0;
  for (std::size_t r = 0; r < w.k; ++r) total += sgcs_row(w.w.row(r), w_hat.w.row(r));
  return total / static_cast<double>(w.k);
}

template <typename T>
Var<T> sgcs_mean(Var<T> w_hat, const Tensor<T>& w) {
  Tape<T>& tape = *w_hat.tape;
  const Tensor<T>& v = tape.value(w_hat);
  if (!v.same_shape(w) || v.rank() != 2 || w.cols() % 2 != 0) {
    throw DimensionError("sgcs_mean shapes " + v.shape_string() + " and " + w.shape_string());
  }
  const std::size_t rows = w.rows(), width = w.cols();
  std::vector<RowTerms> terms(rows);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    terms[r] = row_terms(w.data() + r * width, v.data() + r * width, width);
    if (terms[r].ww == 0.0) throw InvalidInput("reference eigenvector row is zero");
    if (terms[r].vv != 0.0) {
      total += (terms[r].re * terms[r].re + terms[r].im * terms[r].im) / (terms[r].ww * terms[r].vv);
    }
  }
  Tensor<T> out = Tensor<T>::vector(1, static_cast<T>(total / static_cast<double>(rows)));
  const std::size_t id = tape.size();
  const std::size_t in = w_hat.id;
  return tape.record(std::move(out), tape.requires_grad(w_hat),
                     [id, in, w, terms = std::move(terms)](Tape<T>& t) {
                       const double g = static_cast<double>(t.grad(id)[0]) / static_cast<double>(w.rows());
                       const Tensor<T>& v = t.value(Var<T>{&t, in});
                       Tensor<T>& gv = t.grad(in);
                       const std::size_t width = w.cols();
                       for (std::size_t r = 0; r < w.rows(); ++r) {
                         const RowTerms& rt = terms[r];
                         if (rt.vv == 0.0) continue;
                         const double denom = rt.ww * rt.vv;
                         const double s = (rt.re * rt.re + rt.im * rt.im) / denom;
                         // d/dv of (re^2 + im^2) / (ww vv)
                         for (std::size_t j = 0; j + 1 < width; j += 2) {
                           const double wr = w(r, j), wi = w(r, j + 1);
                           const double vr = v(r, j), vi = v(r, j + 1);
                           const double dvr = 2.0 * (rt.re * wr - rt.im * wi) / denom - 2.0 * s * vr / rt.vv;
                           const double dvi = 2.0 * (rt.re * wi + rt.im * wr) / denom - 2.0 * s * vi / rt.vv;
                           gv(r, j) += static_cast<T>(g * dvr);
                           gv(r, j + 1) += static_cast<T>(g * dvi);
                         }
                       }
                     });
}

template <typename T>
Var<T> sgcs_loss(std::span<const LossGroup<T>> groups, std::span<const double> mu) {
  if (groups.empty()) throw InvalidInput("loss over an empty batch");
  if (!mu.empty() && mu.size() != groups.size()) {
    throw DimensionError("one weight per group is required");
  }
  std::optional<Var<T>> acc;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double m = mu.empty() ? 1.0 / static_cast<double>(groups.size()) : mu[i];
    Var<T> term = numcore::scale(sgcs_mean(groups[i].w_hat, groups[i].w), static_cast<T>(-m));
    acc = acc ? numcore::add(*acc, term) : term;
  }
  return *acc;
}

template Var<float> sgcs_mean(Var<float>, const Tensor<float>&);
template Var<double> sgcs_mean(Var<double>, const Tensor<double>&);
template Var<float> sgcs_loss(std::span<const LossGroup<float>>, std::span<const double>);
template Var<double> sgcs_loss(std::span<const LossGroup<double>>, std::span<const double>);

}  // namespace csifb::ablnet
