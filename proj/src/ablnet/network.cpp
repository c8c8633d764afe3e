#include "csifb/ablnet/network.hpp"

#include <map>
#include <numeric>

#include "csifb/ablnet/sgcs.hpp"
#include "csifb/errors.hpp"
#include "csifb/numcore/ops.hpp"
#include "csifb/parallel.hpp"

namespace csifb::ablnet {

std::string to_string(QuantizerMode m) {
  return m == QuantizerMode::bypass ? "bypass" : "straight-through";
}

QuantizerMode quantizer_mode_from_string(const std::string& s) {
  if (s == "bypass") return QuantizerMode::bypass;
  if (s == "straight-through") return QuantizerMode::straight_through;
  throw ConfigError("unknown quantizer mode '" + s + "' (expected bypass or straight-through)");
}

template <typename T>
Tensor<T> truncation_mask(std::size_t steps, std::size_t batch, std::size_t d, std::size_t n) {
  Tensor<T> m = Tensor<T>::matrix(steps * batch, d);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < d && t * d + j < n; ++j) {
      for (std::size_t b = 0; b < batch; ++b) m(t * batch + b, j) = T{1};
    }
  }
  return m;
}

template <typename T>
ChainOutput<T> feedback_chain(const EncoderVars<T>& enc, const DecoderVars<T>& dec, Var<T> x,
                              std::size_t steps, std::size_t batch, const ModelConfig& cfg,
                              QuantizerMode mode, std::size_t n) {
  const std::size_t m = steps * cfg.d;
  if (n > m) throw RangeError("codeword length " + std::to_string(n) + " exceeds " + std::to_string(m));
  ChainOutput<T> out;
  out.c = encoder_forward(enc, x, steps, batch);
  out.c_hat = out.c;
  if (mode == QuantizerMode::straight_through) {
    const unsigned q = cfg.q;
    out.c_hat = numcore::straight_through<T>(out.c_hat, [q](T v) {
      return static_cast<T>(quantize_roundtrip(static_cast<float>(v), q));
    });
  }
  if (n != 0 && n != m) {
    out.c_hat = numcore::mul_const(out.c_hat, truncation_mask<T>(steps, batch, cfg.d, n));
  }
  out.w_hat = decoder_forward(dec, out.c_hat, steps, batch);
  return out;
}

namespace {

// Inference binds parameters as tape constants; nothing is written through
// these references.
EncoderVars<float> frozen(Tape<float>& tape, const EncoderParams<float>& p) {
  return const_cast<EncoderParams<float>&>(p).bind(tape, false);
}
DecoderVars<float> frozen(Tape<float>& tape, const DecoderParams<float>& p) {
  return const_cast<DecoderParams<float>&>(p).bind(tape, false);
}

void check_batch(std::span<const JointEigenvector* const> samples, const ModelConfig& cfg) {
  if (samples.empty()) throw InvalidInput("empty batch");
  const std::size_t k = samples[0]->k;
  for (const auto* s : samples) {
    if (s->k != k) throw InvalidInput("batch mixes subband counts");
    if (s->width() != cfg.features()) {
      throw DimensionError("eigenvector width " + std::to_string(s->width()) + " but model expects " +
                           std::to_string(cfg.features()));
    }
    if (s->k == 0 || s->k > cfg.k_max) throw RangeError("subband count outside [1, K_max]");
  }
}

std::vector<const Tensor<float>*> tensors(std::span<const JointEigenvector* const> samples) {
  std::vector<const Tensor<float>*> t;
  t.reserve(samples.size());
  for (const auto* s : samples) t.push_back(&s->w);
  return t;
}

JointEigenvector unpack_rows(const Tensor<float>& rows, std::size_t k, std::size_t batch,
                             std::size_t b, std::size_t k_max) {
  JointEigenvector w;
  w.k = k;
  w.w = Tensor<float>::matrix(k_max, rows.cols());
  w.mask.assign(k_max, false);
  for (std::size_t t = 0; t < k; ++t) {
    w.mask[t] = true;
    const auto src = rows.row(t * batch + b);
    std::copy(src.begin(), src.end(), w.w.row(t).begin());
  }
  return w;
}

}  // namespace

std::vector<Codeword> encode_batch(const EncoderParams<float>& enc, const ModelConfig& cfg,
                                   std::span<const JointEigenvector* const> samples) {
  check_batch(samples, cfg);
  const std::size_t k = samples[0]->k, batch = samples.size();
  Tape<float> tape;
  const auto ev = frozen(tape, enc);
  const auto t = tensors(samples);
  Var<float> c = encoder_forward(ev, tape.constant(time_major<float>(t, k)), k, batch);
  const Tensor<float>& cv = c.value();
  std::vector<Codeword> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out[b].k = k;
    out[b].d = cfg.d;
    out[b].values.reserve(k * cfg.d);
    for (std::size_t s = 0; s < k; ++s) {
      for (float v : cv.row(s * batch + b)) out[b].values.push_back(v);
    }
  }
  return out;
}

Codeword encode(const JointEigenvector& w, const EncoderParams<float>& enc, const ModelConfig& cfg) {
  const JointEigenvector* p = &w;
  return encode_batch(enc, cfg, std::span(&p, 1)).front();
}

std::vector<JointEigenvector> decode_batch(std::span<const std::vector<float>> c_hats, std::size_t k,
                                           const DecoderParams<float>& dec, const ModelConfig& cfg) {
  if (c_hats.empty()) throw InvalidInput("empty batch");
  const std::size_t d = cfg.d, batch = c_hats.size();
  const std::size_t len = c_hats[0].size();
  if (len % d != 0 || len / d < k || k == 0) {
    throw DimensionError("c_hat length " + std::to_string(len) + " does not fit k=" +
                         std::to_string(k) + ", d=" + std::to_string(d));
  }
  Tensor<float> x = Tensor<float>::matrix(k * batch, d);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& c = c_hats[b];
    if (c.size() != len) throw DimensionError("c_hat lengths differ within a batch");
    for (std::size_t i = k * d; i < len; ++i) {
      if (c[i] != 0.0f) throw InvalidInput("c_hat is non-zero beyond k*d");
    }
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t j = 0; j < d; ++j) x(t * batch + b, j) = c[t * d + j];
    }
  }
  Tape<float> tape;
  const auto dv = frozen(tape, dec);
  Var<float> w_hat = decoder_forward(dv, tape.constant(std::move(x)), k, batch);
  std::vector<JointEigenvector> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) out.push_back(unpack_rows(w_hat.value(), k, batch, b, len / d));
  return out;
}

JointEigenvector decode(std::span<const float> c_hat, std::size_t k, const DecoderParams<float>& dec,
                        const ModelConfig& cfg) {
  const std::vector<float> c(c_hat.begin(), c_hat.end());
  return std::move(decode_batch(std::span(&c, 1), k, dec, cfg).front());
}

std::vector<double> evaluate_sgcs(const EncoderParams<float>& enc, const DecoderParams<float>& dec,
                                  const ModelConfig& cfg, std::span<const JointEigenvector> samples,
                                  const EvalOptions& opts) {
  // Fixed batches per subband count, so the thread count cannot change any sum.
  std::map<std::size_t, std::vector<std::size_t>> by_k;
  for (std::size_t i = 0; i < samples.size(); ++i) by_k[samples[i].k].push_back(i);
  struct Job {
    std::size_t k;
    std::vector<std::size_t> idx;
  };
  std::vector<Job> jobs;
  const std::size_t bs = std::max<std::size_t>(1, opts.batch);
  for (auto& [k, idx] : by_k) {
    for (std::size_t lo = 0; lo < idx.size(); lo += bs) {
      jobs.push_back({k, std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                                   idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), lo + bs)))});
    }
  }
  std::vector<double> out(samples.size());
  parallel_for(jobs.size(), opts.threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    std::vector<const JointEigenvector*> batch;
    for (std::size_t i : job.idx) batch.push_back(&samples[i]);
    check_batch(batch, cfg);
    Tape<float> tape;
    const auto ev = frozen(tape, enc);
    const auto dv = frozen(tape, dec);
    const auto t = tensors(batch);
    const Tensor<float> x = time_major<float>(t, job.k);
    const auto chain = feedback_chain(ev, dv, tape.constant(x), job.k, batch.size(), cfg,
                                      opts.quantize ? QuantizerMode::straight_through : QuantizerMode::bypass,
                                      opts.n);
    const Tensor<float>& w_hat = chain.w_hat.value();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      double total = 0.0;
      for (std::size_t s = 0; s < job.k; ++s) {
        total += sgcs_row(x.row(s * batch.size() + b), w_hat.row(s * batch.size() + b));
      }
      out[job.idx[b]] = total / static_cast<double>(job.k);
    }
  });
  return out;
}

std::vector<double> evaluate_sgcs(const Model<float>& model, std::span<const JointEigenvector> samples,
                                  const EvalOptions& opts) {
  return evaluate_sgcs(model.enc, model.dec, model.config, samples, opts);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("mean of an empty set");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template Tensor<float> truncation_mask(std::size_t, std::size_t, std::size_t, std::size_t);
template Tensor<double> truncation_mask(std::size_t, std::size_t, std::size_t, std::size_t);
template ChainOutput<float> feedback_chain(const EncoderVars<float>&, const DecoderVars<float>&, Var<float>,
                                           std::size_t, std::size_t, const ModelConfig&, QuantizerMode,
                                           std::size_t);
template ChainOutput<double> feedback_chain(const EncoderVars<double>&, const DecoderVars<double>&,
                                            Var<double>, std::size_t, std::size_t, const ModelConfig&,
                                            QuantizerMode, std::size_t);

}  // namespace csifb::ablnet
