#include "csifb/channel/joint.hpp"

#include <string>

#include "csifb/errors.hpp"

namespace csifb::channel {

std::vector<double> realify(const CVector& w) {
  std::vector<double> out(2 * static_cast<std::size_t>(w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out[2 * static_cast<std::size_t>(i)] = w[i].real();
    out[2 * static_cast<std::size_t>(i) + 1] = w[i].imag();
  }
  return out;
}

CVector complexify(std::span<const double> v) {
  if (v.size() % 2 != 0) throw DimensionError("real eigenvector length must be even");
  CVector w(static_cast<Eigen::Index>(v.size() / 2));
  for (std::size_t i = 0; i < v.size() / 2; ++i) {
    w[static_cast<Eigen::Index>(i)] = {v[2 * i], v[2 * i + 1]};
  }
  return w;
}

CVector JointEigenvector::subband(std::size_t row) const {
  if (row >= k) throw RangeError("subband " + std::to_string(row) + " is padding");
  const auto r = w.row(row);
  std::vector<double> tmp(r.begin(), r.end());
  return complexify(tmp);
}

JointEigenvector build_joint(const std::vector<std::vector<double>>& rows, std::size_t k_max) {
  if (rows.empty()) throw InvalidInput("joint eigenvector needs at least one subband");
  if (rows.size() > k_max) {
    throw RangeError("subband count " + std::to_string(rows.size()) + " exceeds K_max " +
                     std::to_string(k_max));
  }
  const std::size_t width = rows.front().size();
  if (width == 0) throw InvalidInput("subband rows must be non-empty");
  JointEigenvector out;
  out.w = numcore::Tensor<float>::matrix(k_max, width);
  out.k = rows.size();
  out.mask.assign(k_max, false);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw InvalidInput("subband rows differ in width");
    for (std::size_t c = 0; c < width; ++c) out.w(r, c) = static_cast<float>(rows[r][c]);
    out.mask[r] = true;
  }
  return out;
}

JointEigenvector repad(const JointEigenvector& w, std::size_t k_max) {
  if (k_max < w.k) {
    throw RangeError("cannot re-pad " + std::to_string(w.k) + " subbands into K_max " +
                     std::to_string(k_max));
  }
  JointEigenvector out;
  out.w = numcore::Tensor<float>::matrix(k_max, w.width());
  out.k = w.k;
  out.mask.assign(k_max, false);
  for (std::size_t r = 0; r < w.k; ++r) {
    for (std::size_t c = 0; c < w.width(); ++c) out.w(r, c) = w.w(r, c);
    out.mask[r] = true;
  }
  return out;
}

}  // namespace csifb::channel
