#include "csifb/septrain/pairs.hpp"

#include <limits>
#include <string>

#include "csifb/binary_io.hpp"
#include "csifb/errors.hpp"

namespace csifb::septrain {

std::vector<std::uint8_t> encode_pairs(const TrainingPairs& p) {
  constexpr auto u16max = std::numeric_limits<std::uint16_t>::max();
  if (p.k_max > u16max || p.n_t > u16max || p.d > u16max || p.q > 16) {
    throw RangeError("pair file header fields exceed u16");
  }
  if (p.pairs.size() > std::numeric_limits<std::uint32_t>::max()) throw RangeError("too many pairs");
  io::Writer w;
  w.put_magic("CSIP");
  w.put<std::uint32_t>(kPairsVersion);
  w.put<std::uint16_t>(p.ue_id);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(p.k_max));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(p.n_t));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(p.d));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(p.q));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.pairs.size()));
  for (const auto& pr : p.pairs) {
    if (pr.w.k_max() != p.k_max || pr.w.n_t() != p.n_t) throw DimensionError("pair eigenvector shape disagrees");
    if (pr.s.q != p.q) throw DimensionError("pair bitstream q disagrees with the header");
    if (pr.s.n_symbols > u16max) throw RangeError("bitstream too long for the pair format");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(pr.w.k));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(pr.s.n_symbols));
    w.put_floats(pr.w.w.span());
    w.put_bytes(pr.s.bytes);
  }
  return w.bytes();
}

TrainingPairs decode_pairs(std::vector<std::uint8_t> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("CSIP");
  r.expect_version(kPairsVersion);
  TrainingPairs p;
  p.ue_id = r.get<std::uint16_t>("ue_id");
  p.k_max = r.get<std::uint16_t>("K_max");
  p.n_t = r.get<std::uint16_t>("N_T");
  p.d = r.get<std::uint16_t>("d");
  const std::size_t q_at = r.offset();
  p.q = r.get<std::uint16_t>("q");
  if (p.k_max == 0 || p.n_t == 0 || p.d == 0) throw FormatError("zero K_max, N_T or d", q_at);
  if (p.q < 1 || p.q > 16) throw FormatError("q=" + std::to_string(p.q) + " outside [1, 16]", q_at);
  const auto count = r.get<std::uint32_t>("pair count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    Pair pr;
    pr.w.k = r.get<std::uint16_t>("subband count");
    if (pr.w.k == 0 || pr.w.k > p.k_max) {
      throw FormatError("pair subband count " + std::to_string(pr.w.k) + " out of range", at);
    }
    const std::size_t n_at = r.offset();
    pr.s.n_symbols = r.get<std::uint16_t>("symbol count");
    if (pr.s.n_symbols > pr.w.k * p.d) {
      throw FormatError("pair holds more symbols than K*d", n_at);
    }
    pr.s.q = p.q;
    pr.w.w = numcore::Tensor<float>::matrix(p.k_max, 2 * p.n_t);
    r.get_floats(pr.w.w.span(), "eigenvector payload");
    pr.w.mask.assign(p.k_max, false);
    for (std::size_t k = 0; k < pr.w.k; ++k) pr.w.mask[k] = true;
    pr.s.bytes = r.get_bytes(ablnet::packed_size(pr.s.n_symbols, p.q), "bitstream");
    p.pairs.push_back(std::move(pr));
  }
  r.expect_end();
  return p;
}

void write_pairs(const TrainingPairs& p, const std::filesystem::path& path) {
  io::Writer w;
  w.put_bytes(encode_pairs(p));
  w.save(path);
}

TrainingPairs read_pairs(const std::filesystem::path& path) { return decode_pairs(io::read_file(path)); }

}  // namespace csifb::septrain
