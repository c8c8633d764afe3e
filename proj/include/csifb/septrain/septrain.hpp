#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "csifb/ablnet/model.hpp"
#include "csifb/ablnet/train.hpp"
#include "csifb/channel/channel.hpp"
#include "csifb/septrain/pairs.hpp"

namespace csifb::septrain {

using ablnet::DecoderParams;
using ablnet::History;
using ablnet::ModelConfig;
using ablnet::TrainConfig;
using channel::JointEigenvector;

struct UeSpec {
  std::uint16_t ue_id = 0;
  ModelConfig model;  // arch selects the encoder variant
  std::span<const JointEigenvector> train;
  std::span<const JointEigenvector> test;
  std::uint64_t init_seed = 0;
};

// A UE's encoder. The parameters stay private: the only way to use them is to
// produce bitstreams through emit_pairs.
class UeEncoder {
 public:
  UeEncoder(std::uint16_t ue_id, ModelConfig cfg, ablnet::EncoderParams<float> params);

  std::uint16_t ue_id() const { return ue_id_; }
  const ModelConfig& config() const { return cfg_; }
  // FNV-1a over every parameter byte, for immutability checks.
  std::uint64_t fingerprint() const;
  void save(const std::filesystem::path& path) const;
  static UeEncoder load(std::uint16_t ue_id, const std::filesystem::path& path);

 private:
  friend TrainingPairs emit_pairs(const UeEncoder& enc, std::span<const JointEigenvector> data, std::size_t n,
                                  unsigned threads);

  std::uint16_t ue_id_;
  ModelConfig cfg_;
  ablnet::EncoderParams<float> params_;
};

struct UeTraining {
  UeEncoder encoder;
  History history;
  // Per-sample test SGCS of the UE's own autoencoder before its decoder is dropped.
  std::vector<double> reference_sgcs;
};

// Trains a full autoencoder on the UE's data and keeps the encoder.
UeTraining train_ue(const UeSpec& spec, const TrainConfig& cfg);

// s = quantize(first n floats of encode(w)); n == 0 keeps all K*d.
TrainingPairs emit_pairs(const UeEncoder& enc, std::span<const JointEigenvector> data, std::size_t n = 0,
                         unsigned threads = 1);

struct DecoderTraining {
  DecoderParams<float> dec;
  History history;
};

// Decoder-only training on every UE's pairs with loss -L2. Test pairs (may be
// empty) drive the history and the learning-rate schedule. Throws ConfigError
// when the pair sets disagree with dec_cfg on K_max, N_T, d or q.
DecoderTraining train_general_decoder(std::span<const TrainingPairs> pairs, DecoderParams<float> init,
                                      const ModelConfig& dec_cfg, const TrainConfig& cfg,
                                      std::span<const TrainingPairs> test = {});

// Same objective starting from a decoder pretrained elsewhere.
DecoderTraining gnb_first_finetune(const DecoderParams<float>& pretrained, std::span<const TrainingPairs> pairs,
                                   const ModelConfig& dec_cfg, const TrainConfig& cfg,
                                   std::span<const TrainingPairs> test = {});

// Per-pair SGCS of the decoder's reconstruction from s.
std::vector<double> pair_sgcs(const DecoderParams<float>& dec, const ModelConfig& dec_cfg, const TrainingPairs& p,
                              unsigned threads = 1);

// L2 over all pairs: mean SGCS over every real subband of every pair.
double l2_objective(const DecoderParams<float>& dec, const ModelConfig& dec_cfg, std::span<const TrainingPairs> pairs);

struct UeEvaluation {
  std::uint16_t ue_id = 0;
  std::string arch;
  double sgcs = 0.0;
  std::optional<double> reference;

  std::optional<double> delta() const {
    return reference ? std::optional<double>(sgcs - *reference) : std::nullopt;
  }
};

// SGCS of each UE's test set through its encoder and the shared decoder.
// Throws InvalidInput on an empty test set.
std::vector<UeEvaluation> evaluate_per_ue(std::span<const UeEncoder> encoders, const DecoderParams<float>& dec,
                                          const ModelConfig& dec_cfg,
                                          std::span<const std::span<const JointEigenvector>> tests,
                                          std::span<const double> references = {}, unsigned threads = 1);

// ---- full experiment ----------------------------------------------------------

struct UeSetup {
  std::uint16_t ue_id = 0;
  ablnet::EncoderArch arch = ablnet::EncoderArch::bilstm_base;
  channel::Profile profile = channel::Profile::A;
};

struct SeptrainConfig {
  ModelConfig model;  // base widths; arch is overridden per UE
  std::vector<UeSetup> ues;
  std::vector<std::size_t> subbands{6};
  std::size_t train_per_k = 1024;
  std::size_t test_per_k = 256;
  std::size_t n_r = 2;
  TrainConfig ue_train;
  TrainConfig decoder_train;
  TrainConfig pretrain;
  TrainConfig finetune;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path pair_dir;  // pair files are written here when set
};

struct SeptrainRow {
  std::uint16_t ue_id = 0;
  std::string arch;
  std::string profile;
  double joint = 0.0;      // UE's own autoencoder
  double ue_first = 0.0;   // UE encoder + general decoder
  double gnb_first = 0.0;  // UE encoder + fine-tuned pretrained decoder
};

struct SeptrainReport {
  std::vector<SeptrainRow> rows;
  double mean_joint = 0.0, mean_ue_first = 0.0, mean_gnb_first = 0.0;
};

// UE trainings, pair exchange, general decoder, then the gNB-first baseline
// (autoencoder pretrained on all profiles pooled, decoder fine-tuned on the
// same pairs).
SeptrainReport run_septrain(const SeptrainConfig& cfg);

// ue_id,arch,profile,joint,ue_first,gnb_first,ue_first_delta,gnb_first_delta
void write_septrain_csv(std::ostream& os, const SeptrainReport& r);

}  // namespace csifb::septrain
