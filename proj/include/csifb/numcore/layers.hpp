#pragma once

#include <random>
#include <string>

#include "csifb/numcore/ops.hpp"
#include "csifb/numcore/parameter.hpp"
#include "csifb/numcore/tape.hpp"

namespace csifb::numcore {

// Parameter-owning counterparts of the *Vars structs in ops.hpp. `bind` puts
// the parameters on a tape as gradient-collecting leaves, or as constants when
// `trainable` is false.

template <typename T>
Var<T> bind_param(Tape<T>& tape, Parameter<T>& p, bool trainable = true) {
  return trainable ? tape.parameter(p) : tape.constant(p.value);
}

template <typename T>
struct DenseParams {
  Parameter<T> w, b;

  static DenseParams init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return {init_matrix<T>(in, out, rng), init_vector<T>(out)};
  }
  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &w});
    out.push_back({prefix + ".b", &b});
  }
  std::size_t in() const { return w.value.rows(); }
  std::size_t out() const { return w.value.cols(); }
};

template <typename T>
struct LayerNormParams {
  Parameter<T> gain, bias;

  static LayerNormParams init(std::size_t features) {
    return {init_vector<T>(features, T{1}), init_vector<T>(features)};
  }
  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".gain", &gain});
    out.push_back({prefix + ".bias", &bias});
  }
};

template <typename T>
struct CellParams {
  CellType type = CellType::lstm;
  // LSTM uses wx, wh, b. GRU uses wx, wh, b (input bias) and bh.
  Parameter<T> wx, wh, b, bh;

  static CellParams init(CellType type, std::size_t input, std::size_t hidden,
                         std::mt19937_64& rng) {
    CellParams p;
    p.type = type;
    const std::size_t gates = (type == CellType::lstm ? 4 : 3) * hidden;
    p.wx = init_matrix<T>(input, gates, rng);
    p.wh = init_matrix<T>(hidden, gates, rng);
    p.b = init_vector<T>(gates);
    if (type == CellType::lstm) {
      for (std::size_t j = hidden; j < 2 * hidden; ++j) p.b.value[j] = T{1};
    } else {
      p.bh = init_vector<T>(gates);
    }
    return p;
  }

  std::size_t input() const { return wx.value.rows(); }
  std::size_t hidden() const { return wh.value.rows(); }

  CellVars<T> bind(Tape<T>& tape, bool trainable = true) {
    CellVars<T> v;
    v.type = type;
    auto p = [&](Parameter<T>& x) { return bind_param(tape, x, trainable); };
    if (type == CellType::lstm) {
      v.lstm = {p(wx), p(wh), p(b)};
    } else {
      v.gru = {p(wx), p(wh), p(b), p(bh)};
    }
    return v;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".wx", &wx});
    out.push_back({prefix + ".wh", &wh});
    if (type == CellType::lstm) {
      out.push_back({prefix + ".b", &b});
    } else {
      out.push_back({prefix + ".bx", &b});
      out.push_back({prefix + ".bh", &bh});
    }
  }
};

template <typename T>
struct BiCellParams {
  CellParams<T> fwd, bwd;

  static BiCellParams init(CellType type, std::size_t input, std::size_t hidden,
                           std::mt19937_64& rng) {
    BiCellParams p;
    p.fwd = CellParams<T>::init(type, input, hidden, rng);
    p.bwd = CellParams<T>::init(type, input, hidden, rng);
    return p;
  }
  BiCellVars<T> bind(Tape<T>& tape, bool trainable = true) {
    return {fwd.bind(tape, trainable), bwd.bind(tape, trainable)};
  }
  void collect(ParamList<T>& out, const std::string& prefix) {
    fwd.collect(out, prefix + ".fwd");
    bwd.collect(out, prefix + ".bwd");
  }
  std::size_t output_width() const { return 2 * fwd.hidden(); }
};

}  // namespace csifb::numcore
