#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace csifb::channel {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kSubcarrierSpacingHz = 15e3;
inline constexpr double kDefaultDelaySpread = 30e-9;

// Stand-ins for the two channel families of the experiments. The numbers are
// generator knobs of the clustered-multipath model below, not 3GPP tables.
enum class Profile : std::uint16_t { A = 0, C = 1, custom = 0xffff };

std::string to_string(Profile p);
Profile profile_from_string(const std::string& s);

struct ChannelConfig {
  std::size_t n_t = 32;
  std::size_t n_r = 4;
  std::size_t k = 12;    // subbands
  std::size_t n_sc = 4;  // subcarriers per subband
  std::size_t paths = 16;
  double delay_spread = kDefaultDelaySpread;  // seconds
  double pdp_decay = 0.25 * kDefaultDelaySpread;
  std::uint64_t seed = 0;
  Profile profile = Profile::A;

  // Throws ConfigError when an invariant is violated.
  void validate() const;
};

// Preset path count and power-delay decay for a profile; other fields from `base`.
ChannelConfig with_profile(ChannelConfig base, Profile p);

struct Path {
  std::complex<double> gain;
  double delay;      // seconds
  double departure;  // radians
  double arrival;    // radians
};

// H_kn for n = 0..N_SC-1 of one subband, each N_R x N_T.
struct SubbandChannel {
  std::vector<CMatrix> h;
};

// Per-sample RNG stream: seed xor splitmix64(sample_index).
std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t sample_index);

// Draws P paths: gains CN(0, sigma_p^2) with an exponential power-delay
// profile normalized to unit total power, delays uniform in [0, 4 delay_spread],
// angles uniform in [0, 2 pi).
std::vector<Path> draw_paths(const ChannelConfig& cfg, std::uint64_t sample_index);

// Sums the paths with half-wavelength ULA steering vectors over contiguous
// subbands at 15 kHz subcarrier spacing.
std::vector<SubbandChannel> synthesize(const ChannelConfig& cfg, const std::vector<Path>& paths);

std::vector<SubbandChannel> generate_channels(const ChannelConfig& cfg,
                                              std::uint64_t sample_index);

CVector steering_vector(std::size_t n, double angle);

// R = (1/N_SC) sum_n H^H H
CMatrix subband_correlation(const SubbandChannel& sb);

}  // namespace csifb::channel
