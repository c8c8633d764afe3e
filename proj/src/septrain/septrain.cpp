#include "csifb/septrain/septrain.hpp"

#include <cstring>
#include <iomanip>
#include <string>

#include "csifb/ablnet/network.hpp"
#include "csifb/ablnet/sgcs.hpp"
#include "csifb/ablnet/weights.hpp"
#include "csifb/adaptive/fbcu.hpp"
#include "csifb/channel/dataset.hpp"
#include "csifb/errors.hpp"
#include "csifb/parallel.hpp"

namespace csifb::septrain {

using ablnet::Codeword;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

UeEncoder::UeEncoder(std::uint16_t ue_id, ModelConfig cfg, ablnet::EncoderParams<float> params)
    : ue_id_(ue_id), cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
}

std::uint64_t UeEncoder::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& np : const_cast<ablnet::EncoderParams<float>&>(params_).params()) {
    for (float v : np.param->value.span()) {
      unsigned char b[sizeof(float)];
      std::memcpy(b, &v, sizeof(float));
      for (unsigned char c : b) h = (h ^ c) * 0x100000001b3ULL;
    }
  }
  return h;
}

void UeEncoder::save(const std::filesystem::path& path) const {
  ablnet::save_weights(path, cfg_, &params_, nullptr);
}

UeEncoder UeEncoder::load(std::uint16_t ue_id, const std::filesystem::path& path) {
  auto mw = ablnet::load_weights(path);
  if (!mw.enc) throw FormatError("weights file holds no encoder", 0);
  return UeEncoder(ue_id, mw.config, std::move(*mw.enc));
}

UeTraining train_ue(const UeSpec& spec, const TrainConfig& cfg) {
  auto model = ablnet::Model<float>::init(spec.model, spec.init_seed);
  TrainConfig tc = cfg;
  tc.train_encoder = true;
  tc.train_decoder = true;
  History h = ablnet::train(model, spec.train, spec.test, tc);
  std::vector<double> ref;
  if (!spec.test.empty()) {
    ablnet::EvalOptions o;
    o.threads = cfg.eval_threads;
    ref = ablnet::evaluate_sgcs(model, spec.test, o);
  }
  return {UeEncoder(spec.ue_id, spec.model, std::move(model.enc)), std::move(h), std::move(ref)};
}

TrainingPairs emit_pairs(const UeEncoder& enc, std::span<const JointEigenvector> data, std::size_t n,
                         unsigned threads) {
  const ModelConfig& mc = enc.cfg_;
  TrainingPairs out;
  out.ue_id = enc.ue_id_;
  out.k_max = mc.k_max;
  out.n_t = mc.n_t;
  out.d = mc.d;
  out.q = mc.q;
  for (const auto& w : data) {
    if (w.k_max() != mc.k_max || w.n_t() != mc.n_t) throw DimensionError("sample shape disagrees with the encoder");
  }
  out.pairs.resize(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const Codeword c = ablnet::encode(data[i], enc.params_, mc);
    const std::size_t keep = n == 0 ? c.size() : n;
    out.pairs[i] = {data[i], ablnet::quantize(adaptive::fbcu_truncate(c, keep), mc.q)};
  });
  return out;
}

namespace {

void check_compatible(std::span<const TrainingPairs> sets, const ModelConfig& c) {
  for (const auto& p : sets) {
    if (p.k_max != c.k_max || p.n_t != c.n_t || p.d != c.d || p.q != c.q) {
      throw ConfigError("pairs of UE " + std::to_string(p.ue_id) + " (K_max=" + std::to_string(p.k_max) +
                        ", N_T=" + std::to_string(p.n_t) + ", d=" + std::to_string(p.d) +
                        ", q=" + std::to_string(p.q) + ") do not match the decoder");
    }
  }
}

// Dequantized, zero-padded decoder input of one pair.
std::vector<float> c_hat_of(const Pair& p, std::size_t total) {
  return adaptive::fbcu_pad(ablnet::dequantize(p.s), total);
}

struct FlatPairs {
  std::vector<const Pair*> items;
  std::map<std::size_t, std::vector<std::size_t>> by_k;
};

FlatPairs flatten(std::span<const TrainingPairs> sets) {
  FlatPairs f;
  for (const auto& s : sets) {
    for (const auto& p : s.pairs) {
      f.by_k[p.w.k].push_back(f.items.size());
      f.items.push_back(&p);
    }
  }
  return f;
}

std::map<std::size_t, double> mean_by_k(const DecoderParams<float>& dec, const ModelConfig& c,
                                        std::span<const TrainingPairs> sets, unsigned threads) {
  std::map<std::size_t, double> sum, count;
  for (const auto& s : sets) {
    const auto scores = pair_sgcs(dec, c, s, threads);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      sum[s.pairs[i].w.k] += scores[i];
      count[s.pairs[i].w.k] += 1.0;
    }
  }
  for (auto& [k, v] : sum) v /= count[k];
  return sum;
}

DecoderTraining fit_decoder(std::span<const TrainingPairs> pairs, DecoderParams<float> dec, const ModelConfig& c,
                            const TrainConfig& cfg, std::span<const TrainingPairs> test) {
  c.validate();
  check_compatible(pairs, c);
  check_compatible(test, c);
  const FlatPairs flat = flatten(pairs);
  if (flat.items.empty() && cfg.epochs > 0) throw InvalidInput("no training pairs");
  std::map<std::size_t, std::size_t> groups;
  for (const auto& [k, idx] : flat.by_k) groups[k] = idx.size();
  TrainConfig tc = cfg;
  tc.fbcu_lengths.clear();  // lengths are fixed by the pairs

  ablnet::ParamList<float> params;
  dec.collect(params);
  ablnet::StepFn step = [&](Tape<float>& tape, const ablnet::BatchSpec& b) {
    const auto& all = flat.by_k.at(b.k);
    const std::size_t batch = b.members.size();
    Tensor<float> c_in = Tensor<float>::matrix(b.k * batch, c.d);
    std::vector<const Tensor<float>*> ws;
    ws.reserve(batch);
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const Pair& p = *flat.items[all[b.members[bi]]];
      ws.push_back(&p.w.w);
      const auto ch = c_hat_of(p, b.k * c.d);
      for (std::size_t t = 0; t < b.k; ++t) {
        for (std::size_t j = 0; j < c.d; ++j) c_in(t * batch + bi, j) = ch[t * c.d + j];
      }
    }
    const Tensor<float> x = ablnet::time_major<float>(ws, b.k);
    const auto dv = dec.bind(tape, true);
    const Var<float> w_hat = ablnet::decoder_forward(dv, tape.constant(c_in), b.k, batch);
    return numcore::scale(ablnet::sgcs_mean(w_hat, x), -1.0f);
  };
  ablnet::EvalFn eval = [&] {
    return test.empty() ? std::map<std::size_t, double>{} : mean_by_k(dec, c, test, cfg.eval_threads);
  };
  History h = ablnet::train_loop(groups, params, tc, step, eval);
  return {std::move(dec), std::move(h)};
}

}  // namespace

DecoderTraining train_general_decoder(std::span<const TrainingPairs> pairs, DecoderParams<float> init,
                                      const ModelConfig& dec_cfg, const TrainConfig& cfg,
                                      std::span<const TrainingPairs> test) {
  return fit_decoder(pairs, std::move(init), dec_cfg, cfg, test);
}

DecoderTraining gnb_first_finetune(const DecoderParams<float>& pretrained, std::span<const TrainingPairs> pairs,
                                   const ModelConfig& dec_cfg, const TrainConfig& cfg,
                                   std::span<const TrainingPairs> test) {
  return fit_decoder(pairs, pretrained, dec_cfg, cfg, test);
}

std::vector<double> pair_sgcs(const DecoderParams<float>& dec, const ModelConfig& dec_cfg, const TrainingPairs& p,
                              unsigned threads) {
  const TrainingPairs* one = &p;
  check_compatible(std::span(one, 1), dec_cfg);
  const FlatPairs flat = flatten(std::span(one, 1));
  std::vector<double> out(p.size());
  constexpr std::size_t kChunk = 256;
  struct Job {
    std::size_t k;
    std::span<const std::size_t> idx;
  };
  std::vector<Job> jobs;
  for (const auto& [k, idx] : flat.by_k) {
    for (std::size_t lo = 0; lo < idx.size(); lo += kChunk) {
      jobs.push_back({k, std::span(idx).subspan(lo, std::min(kChunk, idx.size() - lo))});
    }
  }
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    std::vector<std::vector<float>> c_hats;
    c_hats.reserve(job.idx.size());
    for (std::size_t i : job.idx) c_hats.push_back(c_hat_of(p.pairs[i], p.k_max * p.d));
    const auto w_hats = ablnet::decode_batch(c_hats, job.k, dec, dec_cfg);
    for (std::size_t b = 0; b < job.idx.size(); ++b) {
      out[job.idx[b]] = ablnet::sgcs(p.pairs[job.idx[b]].w, w_hats[b]);
    }
  });
  return out;
}

double l2_objective(const DecoderParams<float>& dec, const ModelConfig& dec_cfg,
                    std::span<const TrainingPairs> pairs) {
  double total = 0.0, rows = 0.0;
  for (const auto& s : pairs) {
    const auto scores = pair_sgcs(dec, dec_cfg, s);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double k = static_cast<double>(s.pairs[i].w.k);
      total += scores[i] * k;  // sgcs() is already the mean over k subbands
      rows += k;
    }
  }
  if (rows == 0.0) throw InvalidInput("L2 over an empty pair set");
  return total / rows;
}

std::vector<UeEvaluation> evaluate_per_ue(std::span<const UeEncoder> encoders, const DecoderParams<float>& dec,
                                          const ModelConfig& dec_cfg,
                                          std::span<const std::span<const JointEigenvector>> tests,
                                          std::span<const double> references, unsigned threads) {
  if (tests.size() != encoders.size()) throw DimensionError("one test set per UE is required");
  if (!references.empty() && references.size() != encoders.size()) {
    throw DimensionError("one reference per UE is required");
  }
  std::vector<UeEvaluation> out;
  for (std::size_t u = 0; u < encoders.size(); ++u) {
    if (tests[u].empty()) throw InvalidInput("empty test set for UE " + std::to_string(encoders[u].ue_id()));
    const auto pairs = emit_pairs(encoders[u], tests[u], 0, threads);
    UeEvaluation e;
    e.ue_id = encoders[u].ue_id();
    e.arch = ablnet::to_string(encoders[u].config().arch);
    e.sgcs = ablnet::mean(pair_sgcs(dec, dec_cfg, pairs, threads));
    if (!references.empty()) e.reference = references[u];
    out.push_back(e);
  }
  return out;
}

SeptrainReport run_septrain(const SeptrainConfig& cfg) {
  if (cfg.ues.empty()) throw ConfigError("septrain needs at least one UE");
  if (cfg.subbands.empty()) throw ConfigError("septrain needs at least one subband count");
  ModelConfig base = cfg.model;
  base.arch = ablnet::EncoderArch::bilstm_base;
  base.validate();

  struct UeData {
    std::vector<JointEigenvector> train, test;
  };
  auto make_data = [&](channel::Profile profile, std::uint64_t seed) {
    UeData d;
    for (std::size_t k : cfg.subbands) {
      channel::ChannelConfig cc;
      cc.n_t = base.n_t;
      cc.n_r = cfg.n_r;
      cc.k = k;
      cc.seed = seed ^ (0x9e3779b97f4a7c15ULL * (k + 1));
      cc = channel::with_profile(cc, profile);
      auto tr = channel::generate_dataset(cc, base.k_max, cfg.train_per_k, 0, channel::Split::train, cfg.threads);
      auto te = channel::generate_dataset(cc, base.k_max, cfg.test_per_k, cfg.train_per_k, channel::Split::test,
                                          cfg.threads);
      d.train.insert(d.train.end(), tr.samples.begin(), tr.samples.end());
      d.test.insert(d.test.end(), te.samples.begin(), te.samples.end());
    }
    return d;
  };

  // Stage 1: every UE trains its own autoencoder and keeps the encoder.
  std::vector<UeData> data;
  std::vector<UeEncoder> encoders;
  std::vector<double> joint;
  for (std::size_t u = 0; u < cfg.ues.size(); ++u) {
    const UeSetup& ue = cfg.ues[u];
    data.push_back(make_data(ue.profile, cfg.seed + 1000 * (u + 1)));
    UeSpec spec;
    spec.ue_id = ue.ue_id;
    spec.model = base;
    spec.model.arch = ue.arch;
    spec.train = data.back().train;
    spec.test = data.back().test;
    spec.init_seed = cfg.seed + 17 * (u + 1);
    TrainConfig tc = cfg.ue_train;
    tc.seed = cfg.seed + 31 * (u + 1);
    tc.eval_threads = cfg.threads;
    UeTraining t = train_ue(spec, tc);
    joint.push_back(ablnet::mean(t.reference_sgcs));
    encoders.push_back(std::move(t.encoder));
  }

  // Stage 2: uplink of (w, s) pairs.
  std::vector<TrainingPairs> train_pairs, test_pairs;
  for (std::size_t u = 0; u < encoders.size(); ++u) {
    train_pairs.push_back(emit_pairs(encoders[u], data[u].train, 0, cfg.threads));
    test_pairs.push_back(emit_pairs(encoders[u], data[u].test, 0, cfg.threads));
    if (!cfg.pair_dir.empty()) {
      std::filesystem::create_directories(cfg.pair_dir);
      write_pairs(train_pairs.back(), cfg.pair_dir / ("ue" + std::to_string(encoders[u].ue_id()) + "_train.csip"));
    }
  }

  // Stage 3: general decoder from pairs only.
  TrainConfig dc = cfg.decoder_train;
  dc.eval_threads = cfg.threads;
  if (dc.seed == 0) dc.seed = cfg.seed + 7;
  auto init = ablnet::Model<float>::init(base, cfg.seed + 5).dec;
  const auto general = train_general_decoder(train_pairs, std::move(init), base, dc, test_pairs);

  // Baseline: autoencoder pretrained on every UE's data pooled, then its
  // decoder fine-tuned on the same pairs.
  std::vector<JointEigenvector> pooled_train, pooled_test;
  for (const auto& d : data) {
    pooled_train.insert(pooled_train.end(), d.train.begin(), d.train.end());
    pooled_test.insert(pooled_test.end(), d.test.begin(), d.test.end());
  }
  auto gnb_model = ablnet::Model<float>::init(base, cfg.seed + 9);
  TrainConfig pc = cfg.pretrain;
  pc.eval_threads = cfg.threads;
  if (pc.seed == 0) pc.seed = cfg.seed + 11;
  ablnet::train(gnb_model, pooled_train, pooled_test, pc);
  TrainConfig fc = cfg.finetune;
  fc.eval_threads = cfg.threads;
  if (fc.seed == 0) fc.seed = cfg.seed + 13;
  const auto tuned = gnb_first_finetune(gnb_model.dec, train_pairs, base, fc, test_pairs);

  std::vector<std::span<const JointEigenvector>> tests;
  for (const auto& d : data) tests.emplace_back(d.test);
  const auto ue_first = evaluate_per_ue(encoders, general.dec, base, tests, joint, cfg.threads);
  const auto gnb_first = evaluate_per_ue(encoders, tuned.dec, base, tests, joint, cfg.threads);

  SeptrainReport rep;
  for (std::size_t u = 0; u < encoders.size(); ++u) {
    SeptrainRow row;
    row.ue_id = encoders[u].ue_id();
    row.arch = ue_first[u].arch;
    row.profile = channel::to_string(cfg.ues[u].profile);
    row.joint = joint[u];
    row.ue_first = ue_first[u].sgcs;
    row.gnb_first = gnb_first[u].sgcs;
    rep.mean_joint += row.joint;
    rep.mean_ue_first += row.ue_first;
    rep.mean_gnb_first += row.gnb_first;
    rep.rows.push_back(row);
  }
  const double n = static_cast<double>(rep.rows.size());
  rep.mean_joint /= n;
  rep.mean_ue_first /= n;
  rep.mean_gnb_first /= n;
  return rep;
}

void write_septrain_csv(std::ostream& os, const SeptrainReport& r) {
  os << "ue_id,arch,profile,joint,ue_first,gnb_first,ue_first_delta,gnb_first_delta\n";
  const auto old = os.precision(9);
  for (const auto& row : r.rows) {
    os << row.ue_id << ',' << row.arch << ',' << row.profile << ',' << row.joint << ',' << row.ue_first << ','
       << row.gnb_first << ',' << row.ue_first - row.joint << ',' << row.gnb_first - row.joint << '\n';
  }
  os << "mean,,," << r.mean_joint << ',' << r.mean_ue_first << ',' << r.mean_gnb_first << ','
     << r.mean_ue_first - r.mean_joint << ',' << r.mean_gnb_first - r.mean_joint << '\n';
  os.precision(old);
}

}  // namespace csifb::septrain
