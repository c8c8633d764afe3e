#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace csifb::ablnet {

// Encoder output of one sample: k*d floats in (0, 1), subband-major.
struct Codeword {
  std::vector<float> values;
  std::size_t k = 0;
  std::size_t d = 0;

  std::size_t size() const { return values.size(); }
};

// Packed q-bit symbols, MSB-first within each byte; the last byte is
// zero-padded in its low bits.
struct Bitstream {
  std::vector<std::uint8_t> bytes;
  std::size_t n_symbols = 0;
  unsigned q = 0;

  std::size_t bits() const { return n_symbols * q; }
  std::uint32_t symbol(std::size_t i) const;
  std::vector<std::uint32_t> symbols() const;

  friend bool operator==(const Bitstream&, const Bitstream&) = default;
};

std::size_t packed_size(std::size_t n_symbols, unsigned q);

// Throws RangeError for a symbol >= 2^q or q outside [1, 16].
Bitstream pack_symbols(std::span<const std::uint32_t> symbols, unsigned q);

struct QuantizerStats {
  std::size_t top_clamps = 0;  // inputs equal to 1.0 mapped to the top bin
};

// symbol = floor(x * 2^q), with x == 1.0 clamped to 2^q - 1. Values outside
// [0, 1] (or NaN) throw RangeError.
std::uint32_t quantize_value(float x, unsigned q, QuantizerStats* stats = nullptr);
// Bin centre (symbol + 0.5) / 2^q.
float dequantize_symbol(std::uint32_t symbol, unsigned q);
// quantize_value followed by dequantize_symbol.
float quantize_roundtrip(float x, unsigned q);

Bitstream quantize(std::span<const float> c, unsigned q, QuantizerStats* stats = nullptr);
std::vector<float> dequantize(const Bitstream& s);

}  // namespace csifb::ablnet
