#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "csifb/ablnet/model.hpp"
#include "csifb/ablnet/quantizer.hpp"
#include "csifb/channel/joint.hpp"

namespace csifb::adaptive {

using ablnet::Bitstream;
using ablnet::Codeword;
using channel::JointEigenvector;

// Admissible codeword lengths for one subband count, sorted and unique.
struct LengthSet {
  std::size_t k = 0;
  std::vector<std::size_t> lengths;

  // Throws ConfigError unless nonempty with every length in [1, k*d].
  void validate(std::size_t d) const;
  std::size_t min() const { return lengths.front(); }
  std::size_t max() const { return lengths.back(); }
};

// Sorts and deduplicates, then validates.
LengthSet make_length_set(std::size_t k, std::vector<std::size_t> lengths, std::size_t d);

// Contiguous lengths ceil(2m/3) .. m with m = k*d: 10..15 for k=3, 20..30 for
// k=6 and 40..60 for k=12 at d=5.
LengthSet default_length_set(std::size_t k, std::size_t d);

// First n values of c. Throws RangeError unless 1 <= n <= c.size().
std::vector<float> fbcu_truncate(std::span<const float> c, std::size_t n);
std::vector<float> fbcu_truncate(const Codeword& c, std::size_t n);

// c_tilde followed by zeros up to `total` floats. Throws RangeError when
// c_tilde is longer than `total`.
std::vector<float> fbcu_pad(std::span<const float> c_tilde, std::size_t total);

// Uniform draw from the set. Throws InvalidInput on an empty set.
std::size_t sample_codeword_length(std::span<const std::size_t> lengths, std::mt19937_64& rng);
std::size_t sample_codeword_length(const LengthSet& set, std::mt19937_64& rng);

struct Roundtrip {
  Bitstream s;  // n symbols of q bits
  JointEigenvector w_hat;
  double rho = 0.0;
};

// encode -> truncate to n -> quantize -> dequantize -> pad -> decode -> SGCS.
Roundtrip feedback_roundtrip(const JointEigenvector& w, std::size_t n, const ablnet::EncoderParams<float>& enc,
                             const ablnet::DecoderParams<float>& dec, const ablnet::ModelConfig& cfg);

// Same, starting from an already computed codeword of w.
Roundtrip feedback_roundtrip(const JointEigenvector& w, const Codeword& c, std::size_t n,
                             const ablnet::DecoderParams<float>& dec, const ablnet::ModelConfig& cfg);

}  // namespace csifb::adaptive
