#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csifb/ablnet/model.hpp"

namespace csifb::ablnet {

inline constexpr std::uint32_t kWeightsVersion = 1;

struct WeightRecord {
  std::string name;
  Tensor<float> value;

  friend bool operator==(const WeightRecord&, const WeightRecord&) = default;
};

// "ABLW" container: u32 version, u32 count, then per record u16 name length,
// name bytes, u32 rank, rank x u32 dims, float32 payload.
std::vector<std::uint8_t> encode_weights(const std::vector<WeightRecord>& records);
std::vector<WeightRecord> decode_weights(std::vector<std::uint8_t> bytes);

// Model files hold a "config" record (k_max, n_t, hidden1, hidden2, d, q,
// arch) followed by "enc.*" and/or "dec.*" parameter records.
struct ModelWeights {
  ModelConfig config;
  std::optional<EncoderParams<float>> enc;
  std::optional<DecoderParams<float>> dec;
};

std::vector<WeightRecord> model_records(const ModelConfig& cfg, const EncoderParams<float>* enc,
                                        const DecoderParams<float>* dec);
ModelWeights weights_from_records(const std::vector<WeightRecord>& records);

void save_weights(const std::filesystem::path& path, const ModelConfig& cfg,
                  const EncoderParams<float>* enc, const DecoderParams<float>* dec);
ModelWeights load_weights(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const Model<float>& model);
// Throws FormatError unless both halves are present.
Model<float> load_model(const std::filesystem::path& path);

}  // namespace csifb::ablnet
