#include "csifb/channel/dataset.hpp"

#include <limits>
#include <string>

#include "csifb/binary_io.hpp"
#include "csifb/channel/eigen.hpp"
#include "csifb/errors.hpp"
#include "csifb/parallel.hpp"

namespace csifb::channel {

SampleResult make_sample(const ChannelConfig& cfg, std::uint64_t sample_index, std::size_t k_max) {
  const auto subbands = generate_channels(cfg, sample_index);
  std::vector<std::vector<double>> rows;
  rows.reserve(subbands.size());
  SampleResult out;
  for (const auto& sb : subbands) {
    const CMatrix r = subband_correlation(sb);
    const SubbandEigen e = dominant_eigenpair(r);
    const double l2 = second_eigenvalue(r, e);
    if (e.lambda - l2 < 1e-8 * e.lambda) out.near_degenerate = true;
    rows.push_back(realify(e.w));
  }
  out.w = build_joint(rows, k_max);
  return out;
}

Dataset generate_dataset(const ChannelConfig& cfg, std::size_t k_max, std::size_t count,
                         std::uint64_t first_index, Split split, unsigned threads) {
  cfg.validate();
  if (cfg.k > k_max) {
    throw RangeError("subband count " + std::to_string(cfg.k) + " exceeds K_max " +
                     std::to_string(k_max));
  }
  Dataset ds;
  ds.k_max = k_max;
  ds.n_t = cfg.n_t;
  ds.seed = cfg.seed;
  ds.profile = cfg.profile;
  ds.config = cfg;
  ds.split = split;
  std::vector<SampleResult> results(count);
  parallel_for(count, threads,
               [&](std::size_t i) { results[i] = make_sample(cfg, first_index + i, k_max); });
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (results[i].near_degenerate) ds.near_degenerate.push_back(i);
    ds.samples.push_back(std::move(results[i].w));
  }
  return ds;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  constexpr auto u16max = std::numeric_limits<std::uint16_t>::max();
  if (ds.k_max > u16max || 2 * ds.n_t > u16max) throw RangeError("dataset dimensions exceed u16");
  if (ds.samples.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw RangeError("too many samples for the dataset format");
  }
  io::Writer w;
  w.put_magic("CSIE");
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ds.k_max));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ds.n_t));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.samples.size()));
  w.put<std::uint64_t>(ds.seed);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ds.profile));
  for (const auto& s : ds.samples) {
    if (s.k_max() != ds.k_max || s.n_t() != ds.n_t) {
      throw DimensionError("sample shape disagrees with dataset K_max/N_T");
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(s.k));
    w.put_floats(s.w.span());
  }
  return w.bytes();
}

Dataset decode_dataset(std::vector<std::uint8_t> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("CSIE");
  r.expect_version(kDatasetVersion);
  Dataset ds;
  ds.k_max = r.get<std::uint16_t>("K_max");
  ds.n_t = r.get<std::uint16_t>("N_T");
  const auto count = r.get<std::uint32_t>("sample count");
  ds.seed = r.get<std::uint64_t>("seed");
  const std::size_t profile_at = r.offset();
  const auto profile = r.get<std::uint16_t>("profile");
  if (profile != static_cast<std::uint16_t>(Profile::A) &&
      profile != static_cast<std::uint16_t>(Profile::C) &&
      profile != static_cast<std::uint16_t>(Profile::custom)) {
    throw FormatError("unknown profile id " + std::to_string(profile), profile_at);
  }
  ds.profile = static_cast<Profile>(profile);
  if (ds.k_max == 0 || ds.n_t == 0) throw FormatError("zero K_max or N_T", r.offset());
  ds.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t k_at = r.offset();
    JointEigenvector s;
    s.k = r.get<std::uint16_t>("subband count");
    if (s.k == 0 || s.k > ds.k_max) {
      throw FormatError("sample subband count " + std::to_string(s.k) + " out of range", k_at);
    }
    s.w = numcore::Tensor<float>::matrix(ds.k_max, 2 * ds.n_t);
    r.get_floats(s.w.span(), "eigenvector payload");
    s.mask.assign(ds.k_max, false);
    for (std::size_t k = 0; k < s.k; ++k) s.mask[k] = true;
    ds.samples.push_back(std::move(s));
  }
  r.expect_end();
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  io::Writer w;
  w.put_bytes(encode_dataset(ds));
  w.save(path);
}

Dataset read_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path));
}

}  // namespace csifb::channel
