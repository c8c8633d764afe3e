#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "csifb/numcore/tape.hpp"
#include "csifb/numcore/tensor.hpp"

namespace csifb::numcore {

// Pre-activations are clamped to this range before any exponential.
inline constexpr double kActivationClamp = 40.0;
inline constexpr double kLayerNormEps = 1e-5;

// ---- elementwise and linear algebra -------------------------------------

// a [n x i] * b [i x o]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

// x [n x o] + bias [o] broadcast over rows
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);

// Row-wise affine map y = xW + b.
template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b);

template <typename T>
Var<T> sigmoid(Var<T> x);

template <typename T>
Var<T> tanh(Var<T> x);

// Normalizes every row over its features: (x - mean) / sqrt(var + eps) * gain + bias.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias);

// Padded form: rows selected by `mask` are normalized, the rest are zero.
template <typename T>
Var<T> layer_norm_masked(Var<T> x, Var<T> gain, Var<T> bias, std::span<const bool> mask);

// Elementwise product with a constant tensor of the same shape.
template <typename T>
Var<T> mul_const(Var<T> x, const Tensor<T>& c);

template <typename T>
Var<T> scale(Var<T> x, T s);

// Sum of every element as a 1-element tensor.
template <typename T>
Var<T> sum(Var<T> x);

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts);

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts);

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t offset, std::size_t count);

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t offset, std::size_t count);

// Forward value is `fn(x)` elementwise; the backward pass is the identity.
template <typename T>
Var<T> straight_through(Var<T> x, const std::function<T(T)>& fn);

// ---- recurrent cells ----------------------------------------------------

enum class CellType { lstm, gru };

// LSTM: gates packed [i | f | g | o] along columns.
//   wx: F x 4H, wh: H x 4H, b: 4H
template <typename T>
struct LstmVars {
  Var<T> wx, wh, b;
};

// GRU: gates packed [r | z | n].
//   wx: F x 3H, wh: H x 3H, bx: 3H, bh: 3H
//   n = tanh(x wx_n + bx_n + r * (h wh_n + bh_n)),  h' = (1 - z) n + z h
template <typename T>
struct GruVars {
  Var<T> wx, wh, bx, bh;
};

// One LSTM step over a batch. `state` packs [h | c] as a B x 2H matrix, so the
// returned state feeds the next step directly.
template <typename T>
Var<T> lstm_cell_step(Var<T> x, Var<T> state, const LstmVars<T>& p);

// Unpacked form: returns (h_t, c_t).
template <typename T>
std::pair<Var<T>, Var<T>> lstm_cell_step(Var<T> x, Var<T> h_prev, Var<T> c_prev,
                                         const LstmVars<T>& p);

template <typename T>
Var<T> gru_cell_step(Var<T> x, Var<T> h_prev, const GruVars<T>& p);

// Parameters of one recurrent direction; exactly one of the two is populated.
template <typename T>
struct CellVars {
  CellType type = CellType::lstm;
  LstmVars<T> lstm{};
  GruVars<T> gru{};

  std::size_t hidden() const;
};

template <typename T>
struct BiCellVars {
  CellVars<T> fwd;
  CellVars<T> bwd;
};

// Bidirectional recurrent layer over a batch of equal-length sequences.
// `seq` holds steps*batch rows in time-major order (row t*batch + b). The
// forward cell runs t = 0..steps-1, the backward cell t = steps-1..0, and row
// t*batch + b of the result is [h_fwd | h_bwd] (width 2H).
template <typename T>
Var<T> bi_sequence(Var<T> seq, std::size_t steps, std::size_t batch,
                   const BiCellVars<T>& cells);

// Single-sequence padded form. `seq` is K_max x F; mask[k] is true exactly for
// k < K. Rows k >= K of the K_max x 2H output are zero and carry no gradient.
template <typename T>
Var<T> bi_sequence_masked(Var<T> seq, std::span<const bool> mask,
                          const BiCellVars<T>& cells);

// Number of leading true entries; throws unless the mask is a non-empty prefix.
std::size_t mask_length(std::span<const bool> mask);

}  // namespace csifb::numcore
