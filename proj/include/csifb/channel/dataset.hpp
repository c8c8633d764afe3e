#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "csifb/channel/channel.hpp"
#include "csifb/channel/joint.hpp"

namespace csifb::channel {

enum class Split { train, test, unspecified };

// Collection of joint eigenvectors sharing N_T and K_max.
//
// The file stores K_max, N_T, seed, profile and the samples. `config`, `split`
// and `near_degenerate` are generation-time metadata and do not round-trip.
struct Dataset {
  std::size_t k_max = 0;
  std::size_t n_t = 0;
  std::uint64_t seed = 0;
  Profile profile = Profile::A;
  std::vector<JointEigenvector> samples;

  std::optional<ChannelConfig> config;
  Split split = Split::unspecified;
  // Indices of samples where some subband had lambda1 - lambda2 < 1e-8 lambda1.
  std::vector<std::size_t> near_degenerate;

  std::size_t size() const { return samples.size(); }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.k_max == b.k_max && a.n_t == b.n_t && a.seed == b.seed && a.profile == b.profile &&
           a.samples == b.samples;
  }
};

struct SampleResult {
  JointEigenvector w;
  bool near_degenerate = false;
};

// Channel -> per-subband correlation -> dominant eigenvector -> joint real form.
SampleResult make_sample(const ChannelConfig& cfg, std::uint64_t sample_index, std::size_t k_max);

// Samples use indices first_index .. first_index + count - 1. Work is split over
// `threads` workers; the result does not depend on the thread count.
Dataset generate_dataset(const ChannelConfig& cfg, std::size_t k_max, std::size_t count,
                         std::uint64_t first_index, Split split, unsigned threads = 1);

inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::vector<std::uint8_t> bytes);

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace csifb::channel
