#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csifb/numcore/layers.hpp"
#include "csifb/numcore/ops.hpp"
#include "csifb/numcore/parameter.hpp"
#include "csifb/numcore/tape.hpp"

namespace csifb::ablnet {

using numcore::CellType;
using numcore::ParamList;
using numcore::Parameter;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

// Encoder variants. `bilstm_wide` doubles both recurrent widths, `gru_base`
// swaps the LSTM cells for GRU cells at the base widths.
enum class EncoderArch : std::uint16_t { bilstm_base = 0, bilstm_wide = 1, gru_base = 2 };

std::string to_string(EncoderArch a);
EncoderArch arch_from_string(const std::string& s);

struct ModelConfig {
  std::size_t k_max = 12;
  std::size_t n_t = 32;
  std::size_t hidden1 = 128;  // per direction, first recurrent layer
  std::size_t hidden2 = 512;  // per direction, second recurrent layer
  std::size_t d = 5;          // codeword floats per subband
  unsigned q = 2;             // bits per codeword float
  EncoderArch arch = EncoderArch::bilstm_base;

  std::size_t features() const { return 2 * n_t; }
  std::size_t codeword_length(std::size_t k) const { return k * d; }
  std::size_t feedback_bits(std::size_t k) const { return k * d * q; }

  // Encoder recurrent widths after the architecture tag is applied.
  std::size_t encoder_hidden1() const;
  std::size_t encoder_hidden2() const;
  CellType encoder_cell() const;

  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct DenseVars {
  Var<T> w, b;
};

template <typename T>
struct NormVars {
  Var<T> gain, bias;
};

// Tape views of the two stacks. from_leaves consumes `leaves` starting at
// `pos` in the same order as the matching Params::collect.
template <typename T>
struct EncoderVars {
  numcore::BiCellVars<T> rnn1, rnn2;
  DenseVars<T> dense1;
  NormVars<T> norm;
  DenseVars<T> dense2;

  static EncoderVars from_leaves(CellType cell, std::span<const Var<T>> leaves, std::size_t& pos);
};

template <typename T>
struct DecoderVars {
  DenseVars<T> dense3;
  numcore::BiCellVars<T> rnn1, rnn2;
  DenseVars<T> dense1;
  NormVars<T> norm;

  static DecoderVars from_leaves(std::span<const Var<T>> leaves, std::size_t& pos);
};

template <typename T>
struct EncoderParams {
  numcore::BiCellParams<T> rnn1, rnn2;
  numcore::DenseParams<T> dense1;
  numcore::LayerNormParams<T> norm;
  numcore::DenseParams<T> dense2;

  static EncoderParams init(const ModelConfig& cfg, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix = "enc");
  ParamList<T> params() {
    ParamList<T> out;
    collect(out);
    return out;
  }
  CellType cell() const { return rnn1.fwd.type; }
  EncoderVars<T> bind(Tape<T>& tape, bool trainable = true);
};

template <typename T>
struct DecoderParams {
  numcore::DenseParams<T> dense3;
  numcore::BiCellParams<T> rnn1, rnn2;
  numcore::DenseParams<T> dense1;
  numcore::LayerNormParams<T> norm;

  static DecoderParams init(const ModelConfig& cfg, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix = "dec");
  ParamList<T> params() {
    ParamList<T> out;
    collect(out);
    return out;
  }
  DecoderVars<T> bind(Tape<T>& tape, bool trainable = true);
};

template <typename T>
struct Model {
  ModelConfig config;
  EncoderParams<T> enc;
  DecoderParams<T> dec;

  // Encoder first, then decoder, from one mt19937_64 stream.
  static Model init(const ModelConfig& cfg, std::uint64_t seed);
  ParamList<T> params() {
    ParamList<T> out;
    enc.collect(out);
    dec.collect(out);
    return out;
  }
};

// Batched forward passes over `batch` sequences of `steps` subbands, stored
// time-major (row t*batch + b).
//
//   encoder: x [steps*batch x F] -> c [steps*batch x d], values in (0, 1)
//   decoder: c [steps*batch x d] -> w_hat [steps*batch x F]
template <typename T>
Var<T> encoder_forward(const EncoderVars<T>& v, Var<T> x, std::size_t steps, std::size_t batch);

template <typename T>
Var<T> decoder_forward(const DecoderVars<T>& v, Var<T> c, std::size_t steps, std::size_t batch);

// Stacks rows 0..k-1 of each sample into the time-major layout above.
template <typename T>
Tensor<T> time_major(std::span<const Tensor<float>* const> samples, std::size_t k);

}  // namespace csifb::ablnet
