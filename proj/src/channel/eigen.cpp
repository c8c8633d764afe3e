#include "csifb/channel/eigen.hpp"

#include <algorithm>
#include <cmath>

#include "csifb/errors.hpp"

namespace csifb::channel {

void normalize_phase(CVector& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double mag = std::abs(w[i]);
    if (mag > 1e-9) {
      w *= std::conj(w[i]) / mag;
      w[i] = {std::abs(w[i]), 0.0};
      return;
    }
  }
}

CVector power_iteration_start(std::size_t n) {
  CVector x(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x[static_cast<Eigen::Index>(i)] = {1.0 / std::sqrt(static_cast<double>(i + 1)), 0.0};
  }
  return x.normalized();
}

double eigen_residual(const CMatrix& r, const SubbandEigen& e) {
  return (r * e.w - e.lambda * e.w).norm();
}

namespace {

// Plain power iteration on `m` from `x`; returns the number of steps taken.
std::size_t iterate(const CMatrix& m, CVector& x, const PowerIterationOptions& opt,
                    bool& converged) {
  converged = false;
  std::size_t it = 0;
  while (it < opt.max_iterations) {
    CVector y = m * x;
    const double ny = y.norm();
    ++it;
    if (ny == 0.0) break;
    y /= ny;
    normalize_phase(y);
    const double diff = (y - x).norm();
    x = std::move(y);
    if (diff < opt.tolerance) {
      converged = true;
      break;
    }
  }
  return it;
}

double rayleigh(const CMatrix& r, const CVector& w) { return (w.adjoint() * r * w)(0, 0).real(); }

bool accurate(const CMatrix& r, const SubbandEigen& e) {
  return eigen_residual(r, e) <= 1e-6 * std::max(e.lambda, 1e-12);
}

}  // namespace

SubbandEigen dominant_eigenpair(const CMatrix& r, const PowerIterationOptions& opt) {
  if (r.rows() != r.cols() || r.rows() == 0) {
    throw DimensionError("correlation matrix must be square and non-empty");
  }
  const double scale = r.norm();
  if (!std::isfinite(scale)) throw InvalidInput("correlation matrix has non-finite entries");
  if ((r - r.adjoint()).norm() > 1e-6 * std::max(1.0, scale)) {
    throw InvalidInput("correlation matrix is not Hermitian within 1e-6");
  }

  SubbandEigen out;
  out.w = power_iteration_start(static_cast<std::size_t>(r.rows()));
  normalize_phase(out.w);
  if (scale == 0.0) {
    out.degenerate = true;
    return out;
  }

  bool converged = false;
  out.iterations = iterate(r, out.w, opt, converged);
  if (out.w.norm() == 0.0 || (r * out.w).norm() == 0.0) {
    // Start vector in the null space: restart from the strongest column.
    Eigen::Index col = 0;
    r.colwise().norm().maxCoeff(&col);
    out.w = r.col(col).normalized();
    normalize_phase(out.w);
    out.iterations += iterate(r, out.w, opt, converged);
  }
  out.lambda = std::max(0.0, rayleigh(r, out.w));

  // Small spectral gap: the ratio lambda2/lambda1 is squared at each level.
  CMatrix m = r / scale;
  for (int level = 0; level < 8 && !accurate(r, out); ++level) {
    m = m * m;
    m /= m.norm();
    out.iterations += iterate(m, out.w, opt, converged);
    out.lambda = std::max(0.0, rayleigh(r, out.w));
  }
  return out;
}

double second_eigenvalue(const CMatrix& r, const SubbandEigen& top) {
  if (top.degenerate) return 0.0;
  const CMatrix deflated = r - top.lambda * top.w * top.w.adjoint();
  const CMatrix herm = 0.5 * (deflated + deflated.adjoint());
  return dominant_eigenpair(herm).lambda;
}

}  // namespace csifb::channel
