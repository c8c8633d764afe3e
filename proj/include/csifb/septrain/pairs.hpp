#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "csifb/ablnet/quantizer.hpp"
#include "csifb/channel/joint.hpp"

namespace csifb::septrain {

// One uplink sample: the UE's input eigenvector and the bitstream its encoder
// produced for it.
struct Pair {
  channel::JointEigenvector w;
  ablnet::Bitstream s;

  friend bool operator==(const Pair&, const Pair&) = default;
};

struct TrainingPairs {
  std::uint16_t ue_id = 0;
  std::size_t k_max = 0;
  std::size_t n_t = 0;
  std::size_t d = 0;
  unsigned q = 0;
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const TrainingPairs&, const TrainingPairs&) = default;
};

inline constexpr std::uint32_t kPairsVersion = 1;

// "CSIP": u32 version, u16 ue_id, u16 K_max, u16 N_T, u16 d, u16 q, u32 count;
// per pair u16 K, u16 n_symbols, K_max*2N_T float32, ceil(n_symbols*q/8) bytes.
std::vector<std::uint8_t> encode_pairs(const TrainingPairs& p);
TrainingPairs decode_pairs(std::vector<std::uint8_t> bytes);

void write_pairs(const TrainingPairs& p, const std::filesystem::path& path);
TrainingPairs read_pairs(const std::filesystem::path& path);

}  // namespace csifb::septrain
