#include "csifb/ablnet/quantizer.hpp"

#include <cmath>
#include <string>

#include "csifb/errors.hpp"

namespace csifb::ablnet {

namespace {

void check_q(unsigned q) {
  if (q < 1 || q > 16) throw RangeError("quantization bits must be in [1, 16], got " + std::to_string(q));
}

}  // namespace

std::size_t packed_size(std::size_t n_symbols, unsigned q) { return (n_symbols * q + 7) / 8; }

std::uint32_t Bitstream::symbol(std::size_t i) const {
  if (i >= n_symbols) throw RangeError("symbol index " + std::to_string(i) + " out of range");
  std::uint32_t v = 0;
  std::size_t bit = i * q;
  for (unsigned b = 0; b < q; ++b, ++bit) {
    const unsigned byte = bytes[bit / 8];
    v = (v << 1) | ((byte >> (7 - bit % 8)) & 1u);
  }
  return v;
}

std::vector<std::uint32_t> Bitstream::symbols() const {
  std::vector<std::uint32_t> out(n_symbols);
  for (std::size_t i = 0; i < n_symbols; ++i) out[i] = symbol(i);
  return out;
}

Bitstream pack_symbols(std::span<const std::uint32_t> symbols, unsigned q) {
  check_q(q);
  Bitstream s;
  s.q = q;
  s.n_symbols = symbols.size();
  s.bytes.assign(packed_size(symbols.size(), q), 0);
  std::size_t bit = 0;
  for (std::uint32_t v : symbols) {
    if (v >> q) throw RangeError("symbol " + std::to_string(v) + " does not fit in " + std::to_string(q) + " bits");
    for (unsigned b = q; b-- > 0; ++bit) {
      if ((v >> b) & 1u) s.bytes[bit / 8] |= static_cast<std::uint8_t>(0x80u >> (bit % 8));
    }
  }
  return s;
}

std::uint32_t quantize_value(float x, unsigned q, QuantizerStats* stats) {
  check_q(q);
  if (!(x >= 0.0f && x <= 1.0f)) throw RangeError("codeword value " + std::to_string(x) + " outside [0, 1]");
  const std::uint32_t levels = 1u << q;
  if (x == 1.0f) {
    if (stats) ++stats->top_clamps;
    return levels - 1;
  }
  const auto s = static_cast<std::uint32_t>(std::floor(static_cast<double>(x) * levels));
  return s < levels ? s : levels - 1;
}

float dequantize_symbol(std::uint32_t symbol, unsigned q) {
  check_q(q);
  if (symbol >> q) throw RangeError("symbol out of range");
  return static_cast<float>((static_cast<double>(symbol) + 0.5) / static_cast<double>(1u << q));
}

float quantize_roundtrip(float x, unsigned q) { return dequantize_symbol(quantize_value(x, q), q); }

Bitstream quantize(std::span<const float> c, unsigned q, QuantizerStats* stats) {
  std::vector<std::uint32_t> symbols(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) symbols[i] = quantize_value(c[i], q, stats);
  return pack_symbols(symbols, q);
}

std::vector<float> dequantize(const Bitstream& s) {
  if (s.bytes.size() != packed_size(s.n_symbols, s.q)) {
    throw DimensionError("bitstream byte count does not match its symbol count");
  }
  std::vector<float> out(s.n_symbols);
  for (std::size_t i = 0; i < s.n_symbols; ++i) out[i] = dequantize_symbol(s.symbol(i), s.q);
  return out;
}

}  // namespace csifb::ablnet
