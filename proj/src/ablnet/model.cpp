#include "csifb/ablnet/model.hpp"

#include <string>

#include "csifb/errors.hpp"

namespace csifb::ablnet {

using numcore::BiCellVars;
using numcore::CellVars;

std::string to_string(EncoderArch a) {
  switch (a) {
    case EncoderArch::bilstm_base: return "bilstm-base";
    case EncoderArch::bilstm_wide: return "bilstm-wide";
    case EncoderArch::gru_base: return "gru-base";
  }
  return "unknown";
}

EncoderArch arch_from_string(const std::string& s) {
  if (s == "bilstm-base") return EncoderArch::bilstm_base;
  if (s == "bilstm-wide") return EncoderArch::bilstm_wide;
  if (s == "gru-base") return EncoderArch::gru_base;
  throw ConfigError("unknown encoder architecture '" + s +
                    "' (expected bilstm-base, bilstm-wide or gru-base)");
}

std::size_t ModelConfig::encoder_hidden1() const {
  return arch == EncoderArch::bilstm_wide ? 2 * hidden1 : hidden1;
}
std::size_t ModelConfig::encoder_hidden2() const {
  return arch == EncoderArch::bilstm_wide ? 2 * hidden2 : hidden2;
}
CellType ModelConfig::encoder_cell() const {
  return arch == EncoderArch::gru_base ? CellType::gru : CellType::lstm;
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("model config: ") + what);
  };
  need(k_max >= 1, "k_max must be >= 1");
  need(n_t >= 1, "n_t must be >= 1");
  need(hidden1 >= 1 && hidden2 >= 1, "hidden widths must be >= 1");
  need(d >= 1, "d must be >= 1");
  need(q >= 1 && q <= 16, "q must be in [1, 16]");
  need(arch == EncoderArch::bilstm_base || arch == EncoderArch::bilstm_wide ||
           arch == EncoderArch::gru_base,
       "unknown encoder architecture");
}

namespace {

template <typename T>
Var<T> take(std::span<const Var<T>> leaves, std::size_t& pos) {
  if (pos >= leaves.size()) throw DimensionError("not enough leaves for the model structure");
  return leaves[pos++];
}

template <typename T>
DenseVars<T> dense_from(std::span<const Var<T>> l, std::size_t& pos) {
  auto w = take(l, pos);
  return {w, take(l, pos)};
}

template <typename T>
NormVars<T> norm_from(std::span<const Var<T>> l, std::size_t& pos) {
  auto g = take(l, pos);
  return {g, take(l, pos)};
}

template <typename T>
CellVars<T> cell_from(CellType type, std::span<const Var<T>> l, std::size_t& pos) {
  CellVars<T> c;
  c.type = type;
  if (type == CellType::lstm) {
    c.lstm.wx = take(l, pos);
    c.lstm.wh = take(l, pos);
    c.lstm.b = take(l, pos);
  } else {
    c.gru.wx = take(l, pos);
    c.gru.wh = take(l, pos);
    c.gru.bx = take(l, pos);
    c.gru.bh = take(l, pos);
  }
  return c;
}

template <typename T>
BiCellVars<T> bi_from(CellType type, std::span<const Var<T>> l, std::size_t& pos) {
  auto f = cell_from(type, l, pos);
  return {f, cell_from(type, l, pos)};
}

template <typename T>
std::vector<Var<T>> bind_all(Tape<T>& tape, const ParamList<T>& list, bool trainable) {
  std::vector<Var<T>> out;
  out.reserve(list.size());
  for (const auto& np : list) out.push_back(numcore::bind_param(tape, *np.param, trainable));
  return out;
}

}  // namespace

template <typename T>
EncoderVars<T> EncoderVars<T>::from_leaves(CellType cell, std::span<const Var<T>> leaves,
                                           std::size_t& pos) {
  EncoderVars v;
  v.rnn1 = bi_from(cell, leaves, pos);
  v.rnn2 = bi_from(cell, leaves, pos);
  v.dense1 = dense_from(leaves, pos);
  v.norm = norm_from(leaves, pos);
  v.dense2 = dense_from(leaves, pos);
  return v;
}

template <typename T>
DecoderVars<T> DecoderVars<T>::from_leaves(std::span<const Var<T>> leaves, std::size_t& pos) {
  DecoderVars v;
  v.dense3 = dense_from(leaves, pos);
  v.rnn1 = bi_from(CellType::lstm, leaves, pos);
  v.rnn2 = bi_from(CellType::lstm, leaves, pos);
  v.dense1 = dense_from(leaves, pos);
  v.norm = norm_from(leaves, pos);
  return v;
}

template <typename T>
EncoderParams<T> EncoderParams<T>::init(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const auto cell = cfg.encoder_cell();
  const std::size_t h1 = cfg.encoder_hidden1(), h2 = cfg.encoder_hidden2();
  EncoderParams p;
  p.rnn1 = numcore::BiCellParams<T>::init(cell, cfg.features(), h1, rng);
  p.rnn2 = numcore::BiCellParams<T>::init(cell, 2 * h1, h2, rng);
  p.dense1 = numcore::DenseParams<T>::init(2 * h2, cfg.features(), rng);
  p.norm = numcore::LayerNormParams<T>::init(cfg.features());
  p.dense2 = numcore::DenseParams<T>::init(cfg.features(), cfg.d, rng);
  return p;
}

template <typename T>
void EncoderParams<T>::collect(ParamList<T>& out, const std::string& prefix) {
  rnn1.collect(out, prefix + ".rnn1");
  rnn2.collect(out, prefix + ".rnn2");
  dense1.collect(out, prefix + ".dense1");
  norm.collect(out, prefix + ".norm");
  dense2.collect(out, prefix + ".dense2");
}

template <typename T>
EncoderVars<T> EncoderParams<T>::bind(Tape<T>& tape, bool trainable) {
  const auto vars = bind_all(tape, params(), trainable);
  std::size_t pos = 0;
  return EncoderVars<T>::from_leaves(cell(), vars, pos);
}

template <typename T>
DecoderParams<T> DecoderParams<T>::init(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  DecoderParams p;
  p.dense3 = numcore::DenseParams<T>::init(cfg.d, cfg.features(), rng);
  p.rnn1 = numcore::BiCellParams<T>::init(CellType::lstm, cfg.features(), cfg.hidden1, rng);
  p.rnn2 = numcore::BiCellParams<T>::init(CellType::lstm, 2 * cfg.hidden1, cfg.hidden2, rng);
  p.dense1 = numcore::DenseParams<T>::init(2 * cfg.hidden2, cfg.features(), rng);
  p.norm = numcore::LayerNormParams<T>::init(cfg.features());
  return p;
}

template <typename T>
void DecoderParams<T>::collect(ParamList<T>& out, const std::string& prefix) {
  dense3.collect(out, prefix + ".dense3");
  rnn1.collect(out, prefix + ".rnn1");
  rnn2.collect(out, prefix + ".rnn2");
  dense1.collect(out, prefix + ".dense1");
  norm.collect(out, prefix + ".norm");
}

template <typename T>
DecoderVars<T> DecoderParams<T>::bind(Tape<T>& tape, bool trainable) {
  const auto vars = bind_all(tape, params(), trainable);
  std::size_t pos = 0;
  return DecoderVars<T>::from_leaves(vars, pos);
}

template <typename T>
Model<T> Model<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model m;
  m.config = cfg;
  m.enc = EncoderParams<T>::init(cfg, rng);
  m.dec = DecoderParams<T>::init(cfg, rng);
  return m;
}

template <typename T>
Var<T> encoder_forward(const EncoderVars<T>& v, Var<T> x, std::size_t steps, std::size_t batch) {
  using namespace numcore;
  Var<T> x1 = bi_sequence(bi_sequence(x, steps, batch, v.rnn1), steps, batch, v.rnn2);
  Var<T> x2 = add(dense(x1, v.dense1.w, v.dense1.b), x);
  Var<T> x3 = dense(layer_norm(x2, v.norm.gain, v.norm.bias), v.dense2.w, v.dense2.b);
  return sigmoid(x3);
}

template <typename T>
Var<T> decoder_forward(const DecoderVars<T>& v, Var<T> c, std::size_t steps, std::size_t batch) {
  using namespace numcore;
  Var<T> x4 = dense(c, v.dense3.w, v.dense3.b);
  Var<T> x5 = bi_sequence(bi_sequence(x4, steps, batch, v.rnn1), steps, batch, v.rnn2);
  Var<T> x6 = add(dense(x5, v.dense1.w, v.dense1.b), x4);
  return layer_norm(x6, v.norm.gain, v.norm.bias);
}

template <typename T>
Tensor<T> time_major(std::span<const Tensor<float>* const> samples, std::size_t k) {
  if (samples.empty()) throw InvalidInput("empty batch");
  const std::size_t batch = samples.size(), f = samples[0]->cols();
  Tensor<T> out = Tensor<T>::matrix(k * batch, f);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& s = *samples[b];
    if (s.cols() != f || s.rows() < k) throw DimensionError("batch samples disagree in shape");
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t j = 0; j < f; ++j) out(t * batch + b, j) = static_cast<T>(s(t, j));
    }
  }
  return out;
}

#define CSIFB_INSTANTIATE_MODEL(T)                                                         \
  template struct EncoderVars<T>;                                                          \
  template struct DecoderVars<T>;                                                          \
  template struct EncoderParams<T>;                                                        \
  template struct DecoderParams<T>;                                                        \
  template struct Model<T>;                                                                \
  template Var<T> encoder_forward(const EncoderVars<T>&, Var<T>, std::size_t, std::size_t); \
  template Var<T> decoder_forward(const DecoderVars<T>&, Var<T>, std::size_t, std::size_t); \
  template Tensor<T> time_major(std::span<const Tensor<float>* const>, std::size_t);

CSIFB_INSTANTIATE_MODEL(float)
CSIFB_INSTANTIATE_MODEL(double)

}  // namespace csifb::ablnet
