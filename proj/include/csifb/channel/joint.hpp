#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csifb/channel/channel.hpp"
#include "csifb/numcore/tensor.hpp"

namespace csifb::channel {

// Interleaved [Re w1, Im w1, ..., Re wN, Im wN].
std::vector<double> realify(const CVector& w);
CVector complexify(std::span<const double> v);

// Subband eigenvectors of one sample stacked row-wise and zero-padded to K_max.
struct JointEigenvector {
  numcore::Tensor<float> w;  // K_max x 2 N_T
  std::size_t k = 0;         // real subband count
  std::vector<bool> mask;    // mask[i] == (i < k)

  std::size_t k_max() const { return w.rows(); }
  std::size_t width() const { return w.cols(); }
  std::size_t n_t() const { return w.cols() / 2; }

  // Complex eigenvector of real subband `row`.
  CVector subband(std::size_t row) const;

  friend bool operator==(const JointEigenvector& a, const JointEigenvector& b) {
    return a.k == b.k && a.mask == b.mask && a.w == b.w;
  }
};

// Throws RangeError when rows.size() > k_max and InvalidInput when it is zero
// or row widths disagree.
JointEigenvector build_joint(const std::vector<std::vector<double>>& rows, std::size_t k_max);

// Same sample re-padded to another K_max (>= k).
JointEigenvector repad(const JointEigenvector& w, std::size_t k_max);

}  // namespace csifb::channel
