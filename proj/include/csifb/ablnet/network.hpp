#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csifb/ablnet/model.hpp"
#include "csifb/ablnet/quantizer.hpp"
#include "csifb/channel/joint.hpp"

namespace csifb::ablnet {

using channel::JointEigenvector;

// How the quantizer sits in a forward pass. `bypass` feeds raw codewords to the
// decoder; `straight_through` feeds bin centres forward and passes gradients
// through unchanged.
enum class QuantizerMode { bypass, straight_through };

std::string to_string(QuantizerMode m);
QuantizerMode quantizer_mode_from_string(const std::string& s);

template <typename T>
struct ChainOutput {
  Var<T> c;      // encoder output, steps*batch x d
  Var<T> c_hat;  // after quantizer and length truncation
  Var<T> w_hat;  // steps*batch x F
};

// 0/1 mask over the time-major codeword layout keeping flattened positions
// t*d + j < n of every sample.
template <typename T>
Tensor<T> truncation_mask(std::size_t steps, std::size_t batch, std::size_t d, std::size_t n);

// encoder -> quantizer -> keep first n floats per sample -> decoder.
// n == 0 keeps all steps*d floats.
template <typename T>
ChainOutput<T> feedback_chain(const EncoderVars<T>& enc, const DecoderVars<T>& dec, Var<T> x,
                              std::size_t steps, std::size_t batch, const ModelConfig& cfg,
                              QuantizerMode mode, std::size_t n = 0);

// ---- single-model inference (float) ----------------------------------------
// These only read parameters and may run concurrently on one model.

// Codewords of samples that share k, in input order.
std::vector<Codeword> encode_batch(const EncoderParams<float>& enc, const ModelConfig& cfg,
                                   std::span<const JointEigenvector* const> samples);

// Only the k real subbands are processed, so the result does not depend on
// how far `w` is padded.
Codeword encode(const JointEigenvector& w, const EncoderParams<float>& enc, const ModelConfig& cfg);

// Each c_hat holds K_max*d floats and is zero beyond k*d; the output has
// K_max = c_hat.size() / d rows with rows >= k zero.
std::vector<JointEigenvector> decode_batch(std::span<const std::vector<float>> c_hats, std::size_t k,
                                           const DecoderParams<float>& dec, const ModelConfig& cfg);

JointEigenvector decode(std::span<const float> c_hat, std::size_t k, const DecoderParams<float>& dec,
                        const ModelConfig& cfg);

struct EvalOptions {
  bool quantize = true;
  std::size_t n = 0;  // codeword floats kept per sample, 0 = all
  std::size_t batch = 256;
  unsigned threads = 1;
};

// Per-sample SGCS of the full feedback chain, in sample order. Results do not
// depend on the thread count.
std::vector<double> evaluate_sgcs(const Model<float>& model,
                                  std::span<const JointEigenvector> samples,
                                  const EvalOptions& opts = {});

// Same, with encoder and decoder from different owners.
std::vector<double> evaluate_sgcs(const EncoderParams<float>& enc, const DecoderParams<float>& dec,
                                  const ModelConfig& cfg, std::span<const JointEigenvector> samples,
                                  const EvalOptions& opts = {});

double mean(std::span<const double> v);

}  // namespace csifb::ablnet
