#include "csifb/adaptive/fbcu.hpp"

#include <algorithm>
#include <string>

#include "csifb/ablnet/network.hpp"
#include "csifb/ablnet/sgcs.hpp"
#include "csifb/errors.hpp"

namespace csifb::adaptive {

void LengthSet::validate(std::size_t d) const {
  if (lengths.empty()) throw ConfigError("length set for K=" + std::to_string(k) + " is empty");
  const std::size_t m = k * d;
  for (std::size_t n : lengths) {
    if (n < 1 || n > m) {
      throw ConfigError("codeword length " + std::to_string(n) + " outside [1, " + std::to_string(m) +
                        "] for K=" + std::to_string(k));
    }
  }
  if (!std::is_sorted(lengths.begin(), lengths.end()) ||
      std::adjacent_find(lengths.begin(), lengths.end()) != lengths.end()) {
    throw ConfigError("length set must be sorted and unique");
  }
}

LengthSet make_length_set(std::size_t k, std::vector<std::size_t> lengths, std::size_t d) {
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  LengthSet s{k, std::move(lengths)};
  s.validate(d);
  return s;
}

LengthSet default_length_set(std::size_t k, std::size_t d) {
  const std::size_t m = k * d;
  if (m == 0) throw ConfigError("default length set needs k, d >= 1");
  LengthSet s{k, {}};
  for (std::size_t n = (2 * m + 2) / 3; n <= m; ++n) s.lengths.push_back(n);
  return s;
}

std::vector<float> fbcu_truncate(std::span<const float> c, std::size_t n) {
  if (n < 1 || n > c.size()) {
    throw RangeError("truncation length " + std::to_string(n) + " outside [1, " + std::to_string(c.size()) + "]");
  }
  return {c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<float> fbcu_truncate(const Codeword& c, std::size_t n) { return fbcu_truncate(c.values, n); }

std::vector<float> fbcu_pad(std::span<const float> c_tilde, std::size_t total) {
  if (c_tilde.size() > total) {
    throw RangeError("cannot pad " + std::to_string(c_tilde.size()) + " floats to " + std::to_string(total));
  }
  std::vector<float> out(total, 0.0f);
  std::copy(c_tilde.begin(), c_tilde.end(), out.begin());
  return out;
}

std::size_t sample_codeword_length(std::span<const std::size_t> lengths, std::mt19937_64& rng) {
  if (lengths.empty()) throw InvalidInput("cannot sample from an empty length set");
  std::uniform_int_distribution<std::size_t> pick(0, lengths.size() - 1);
  return lengths[pick(rng)];
}

std::size_t sample_codeword_length(const LengthSet& set, std::mt19937_64& rng) {
  return sample_codeword_length(set.lengths, rng);
}

Roundtrip feedback_roundtrip(const JointEigenvector& w, const Codeword& c, std::size_t n,
                             const ablnet::DecoderParams<float>& dec, const ablnet::ModelConfig& cfg) {
  if (c.k != w.k) throw DimensionError("codeword and eigenvector subband counts differ");
  Roundtrip r;
  r.s = ablnet::quantize(fbcu_truncate(c, n), cfg.q);
  const std::vector<float> c_hat = fbcu_pad(ablnet::dequantize(r.s), w.k_max() * cfg.d);
  r.w_hat = ablnet::decode(c_hat, w.k, dec, cfg);
  r.rho = ablnet::sgcs(w, r.w_hat);
  return r;
}

Roundtrip feedback_roundtrip(const JointEigenvector& w, std::size_t n, const ablnet::EncoderParams<float>& enc,
                             const ablnet::DecoderParams<float>& dec, const ablnet::ModelConfig& cfg) {
  return feedback_roundtrip(w, ablnet::encode(w, enc, cfg), n, dec, cfg);
}

}  // namespace csifb::adaptive
