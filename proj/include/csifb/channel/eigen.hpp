#pragma once

#include <cstddef>

#include "csifb/channel/channel.hpp"

namespace csifb::channel {

struct SubbandEigen {
  double lambda = 0.0;
  CVector w;                 // unit norm, phase-normalized
  bool degenerate = false;   // zero matrix: w is the start vector
  std::size_t iterations = 0;
};

struct PowerIterationOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 1000;
};

// Rotates w so its first entry with magnitude > 1e-9 is real and nonnegative.
void normalize_phase(CVector& w);

// Deterministic start vector used for every solve.
CVector power_iteration_start(std::size_t n);

// Dominant eigenpair of a Hermitian PSD matrix by power iteration.
//
// Iterates x <- R x / |R x| with phase normalization until successive unit
// iterates differ by less than `tolerance` or `max_iterations` is hit. If the
// residual |R w - lambda w| still exceeds 1e-6 * max(lambda, 1e-12) (a small
// spectral gap), iteration continues on repeated squares of R, which share
// its eigenvectors and have a wider relative gap.
SubbandEigen dominant_eigenpair(const CMatrix& r, const PowerIterationOptions& opt = {});

// Second-largest eigenvalue via deflation of the dominant pair.
double second_eigenvalue(const CMatrix& r, const SubbandEigen& top);

double eigen_residual(const CMatrix& r, const SubbandEigen& e);

}  // namespace csifb::channel
