#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "csifb/ablnet/model.hpp"
#include "csifb/channel/joint.hpp"

namespace csifb::adaptive {

struct BnaConfig {
  double rho_t = 0.9;
  double eps = 0.01;
  std::size_t q_min = 0;  // bits, multiples of q
  std::size_t q_max = 0;
  unsigned q = 2;

  // Throws ConfigError on a violated invariant.
  void validate() const;
};

enum class Clamp { none, min, max };
std::string to_string(Clamp c);

struct BnaResult {
  std::size_t q_a = 0;
  double rho_a = 0.0;
  std::size_t evals = 0;  // distinct eval calls
  Clamp clamped = Clamp::none;
  bool hit_band = false;
  std::vector<std::size_t> trace;  // midpoints visited, as symbol counts n = Q/q
};

// Bits -> SGCS. Must be deterministic for a fixed argument.
using BnaEval = std::function<double(std::size_t)>;

// Binary search over n = Q/q for a Q whose SGCS lies within eps of rho_t.
// rho_i is the known SGCS at q_i and is never re-evaluated. When the band is
// missed the last midpoint is returned; it is flagged as clamped when it sits
// at a bound with SGCS still on the far side of the band. Throws RangeError
// when q_i is outside [q_min, q_max] or not a multiple of q.
BnaResult bna_adjust(const BnaEval& eval, std::size_t q_i, double rho_i, const BnaConfig& cfg);

// Upper bound on BnaResult::evals for a configuration.
std::size_t bna_eval_bound(const BnaConfig& cfg);

// ---- sweeps -------------------------------------------------------------------

struct BnaBounds {
  std::size_t q_min = 0, q_max = 0, q_i = 0;
};

struct BnaSweepConfig {
  double rho_t = 0.9;
  double eps = 0.01;
  // Subband count -> bit bounds and initial bits.
  std::map<std::size_t, BnaBounds> bounds;
  unsigned threads = 1;
};

struct BnaSweepRow {
  std::size_t sample_id = 0;
  std::size_t k = 0;
  std::size_t q_i = 0;
  double rho_i = 0.0;
  BnaResult result;
};

struct BnaSummary {
  std::size_t count = 0;
  double mean_q_i = 0.0, mean_rho_i = 0.0;
  double mean_q_a = 0.0, mean_rho_a = 0.0;
  std::size_t hits = 0, clamped_min = 0, clamped_max = 0;
  // Empirical CDFs on the grid 0, 0.01, ..., 1.
  std::vector<std::pair<double, double>> cdf_initial;
  std::vector<std::pair<double, double>> cdf_adjusted;
};

struct BnaSweep {
  std::vector<BnaSweepRow> rows;
  BnaSummary summary;
};

// Runs bna_adjust per sample with eval(Q) = feedback_roundtrip at n = Q/q.
// Samples are processed in parallel; results do not depend on the thread count.
BnaSweep bna_sweep(std::span<const channel::JointEigenvector> samples, const ablnet::EncoderParams<float>& enc,
                   const ablnet::DecoderParams<float>& dec, const ablnet::ModelConfig& model,
                   const BnaSweepConfig& cfg);

// Fraction of values <= x.
double empirical_cdf(std::span<const double> values, double x);

BnaSummary summarize(std::span<const BnaSweepRow> rows);

// CSV: sample_id,K,Q_i,rho_i,Q_a,rho_a,evals,clamped,hit_band
void write_sweep_csv(std::ostream& os, std::span<const BnaSweepRow> rows);
std::string summary_json(const BnaSummary& s, double rho_t, double eps);

}  // namespace csifb::adaptive
