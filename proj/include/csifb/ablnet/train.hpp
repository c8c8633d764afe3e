#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "csifb/ablnet/model.hpp"
#include "csifb/ablnet/network.hpp"
#include "csifb/numcore/adam.hpp"

namespace csifb::ablnet {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double lr = 0.0;
  std::map<std::size_t, double> test_sgcs;  // by subband count
  double mean_test_sgcs = 0.0;              // mean over subband counts
};

struct History {
  std::map<std::size_t, double> initial_test_sgcs;
  double initial_mean_test_sgcs = 0.0;
  std::vector<EpochRecord> epochs;
};

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch = 128;
  double lr = 5e-4;
  std::uint64_t seed = 0;
  QuantizerMode quantizer = QuantizerMode::straight_through;
  // Subband count -> admissible codeword lengths, drawn afresh for every
  // batch (or once per epoch and count when fbcu_per_batch is off). Counts not
  // listed train at full length.
  std::map<std::size_t, std::vector<std::size_t>> fbcu_lengths;
  bool fbcu_per_batch = true;
  // Subband count -> relative loss weight (default 1, i.e. equal weights).
  std::map<std::size_t, double> group_weights;
  std::size_t lr_patience = 20;
  double lr_floor = 1e-5;
  bool train_encoder = true;
  bool train_decoder = true;
  unsigned eval_threads = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Joint encoder/decoder training on K-homogeneous minibatches, round-robin
// over subband counts. Test SGCS is measured with hard quantization at full
// codeword length. Throws DivergenceError when the loss stops being finite.
History train(Model<float>& model, std::span<const JointEigenvector> train_set,
              std::span<const JointEigenvector> test_set, const TrainConfig& cfg);

// ---- shared loop ------------------------------------------------------------

// One minibatch: subband count, member indices within that count's group and
// the codeword length n for this batch (0 = full).
struct BatchSpec {
  std::size_t k = 0;
  std::span<const std::size_t> members;
  std::size_t n = 0;
};

using StepFn = std::function<Var<float>(Tape<float>&, const BatchSpec&)>;
using EvalFn = std::function<std::map<std::size_t, double>()>;

// Shuffling, batching, Adam, learning-rate plateau halving and history.
// `groups` maps subband count -> number of items; `step` builds the loss for a
// batch and `eval` returns test SGCS per subband count (may be empty).
History train_loop(const std::map<std::size_t, std::size_t>& groups, const ParamList<float>& params,
                   const TrainConfig& cfg, const StepFn& step, const EvalFn& eval);

// Subband count -> indices of samples with that count, in sample order.
std::map<std::size_t, std::vector<std::size_t>> group_by_k(std::span<const JointEigenvector> samples);

}  // namespace csifb::ablnet
