#include "csifb/channel/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "csifb/errors.hpp"

namespace csifb::channel {

std::string to_string(Profile p) {
  switch (p) {
    case Profile::A: return "A";
    case Profile::C: return "C";
    case Profile::custom: return "custom";
  }
  return "custom";
}

Profile profile_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Profile::A;
  if (s == "C" || s == "c") return Profile::C;
  if (s == "custom") return Profile::custom;
  throw ConfigError("unknown channel profile '" + s + "' (expected A or C)");
}

void ChannelConfig::validate() const {
  if (n_t < 1 || n_r < 1 || k < 1 || n_sc < 1 || paths < 1) {
    throw ConfigError("channel dimensions (n_t, n_r, k, n_sc, paths) must all be >= 1");
  }
  if (!(delay_spread > 0.0)) throw ConfigError("delay_spread must be > 0");
  if (!(pdp_decay > 0.0)) throw ConfigError("pdp_decay must be > 0");
}

ChannelConfig with_profile(ChannelConfig base, Profile p) {
  base.profile = p;
  switch (p) {
    case Profile::A:
      base.paths = 16;
      base.pdp_decay = 0.25 * base.delay_spread;
      break;
    case Profile::C:
      base.paths = 24;
      base.pdp_decay = 0.5 * base.delay_spread;
      break;
    case Profile::custom:
      break;
  }
  return base;
}

std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t sample_index) {
  std::uint64_t z = sample_index + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return seed ^ z;
}

std::vector<Path> draw_paths(const ChannelConfig& cfg, std::uint64_t sample_index) {
  cfg.validate();
  std::mt19937_64 rng(sample_stream_seed(cfg.seed, sample_index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<Path> paths(cfg.paths);
  double total = 0.0;
  for (auto& p : paths) {
    p.delay = unit(rng) * 4.0 * cfg.delay_spread;
    p.departure = unit(rng) * two_pi;
    p.arrival = unit(rng) * two_pi;
    total += std::exp(-p.delay / cfg.pdp_decay);
  }
  for (auto& p : paths) {
    const double power = std::exp(-p.delay / cfg.pdp_decay) / total;
    const double s = std::sqrt(power / 2.0);
    const double re = normal(rng), im = normal(rng);
    p.gain = {s * re, s * im};
  }
  return paths;
}

CVector steering_vector(std::size_t n, double angle) {
  CVector a(static_cast<Eigen::Index>(n));
  const double phase = std::numbers::pi * std::sin(angle);
  for (std::size_t i = 0; i < n; ++i) {
    a[static_cast<Eigen::Index>(i)] = std::polar(1.0, phase * static_cast<double>(i));
  }
  return a;
}

std::vector<SubbandChannel> synthesize(const ChannelConfig& cfg, const std::vector<Path>& paths) {
  cfg.validate();
  const auto nr = static_cast<Eigen::Index>(cfg.n_r);
  const auto nt = static_cast<Eigen::Index>(cfg.n_t);
  std::vector<CMatrix> outer;
  outer.reserve(paths.size());
  for (const auto& p : paths) {
    outer.push_back(p.gain * steering_vector(cfg.n_r, p.arrival) *
                    steering_vector(cfg.n_t, p.departure).adjoint());
  }
  std::vector<SubbandChannel> out(cfg.k);
  for (std::size_t k = 0; k < cfg.k; ++k) {
    out[k].h.reserve(cfg.n_sc);
    for (std::size_t n = 0; n < cfg.n_sc; ++n) {
      const double f = static_cast<double>(k * cfg.n_sc + n) * kSubcarrierSpacingHz;
      CMatrix h = CMatrix::Zero(nr, nt);
      for (std::size_t p = 0; p < paths.size(); ++p) {
        h += outer[p] * std::polar(1.0, -2.0 * std::numbers::pi * paths[p].delay * f);
      }
      out[k].h.push_back(std::move(h));
    }
  }
  return out;
}

std::vector<SubbandChannel> generate_channels(const ChannelConfig& cfg,
                                              std::uint64_t sample_index) {
  return synthesize(cfg, draw_paths(cfg, sample_index));
}

CMatrix subband_correlation(const SubbandChannel& sb) {
  if (sb.h.empty()) throw InvalidInput("subband has no subcarriers");
  const auto nt = sb.h.front().cols();
  CMatrix r = CMatrix::Zero(nt, nt);
  for (const auto& h : sb.h) {
    if (h.cols() != nt) throw DimensionError("subcarrier channels differ in N_T");
    r.noalias() += h.adjoint() * h;
  }
  r /= static_cast<double>(sb.h.size());
  return r;
}

}  // namespace csifb::channel
