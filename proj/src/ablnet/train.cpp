#include "csifb/ablnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "csifb/ablnet/sgcs.hpp"
#include "csifb/errors.hpp"

namespace csifb::ablnet {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5eed5eed5eed5eedULL;

double mean_of(const std::map<std::size_t, double>& m) {
  double s = 0.0;
  for (const auto& [k, v] : m) s += v;
  return m.empty() ? 0.0 : s / static_cast<double>(m.size());
}

}  // namespace

std::map<std::size_t, std::vector<std::size_t>> group_by_k(std::span<const JointEigenvector> samples) {
  std::map<std::size_t, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) out[samples[i].k].push_back(i);
  return out;
}

History train_loop(const std::map<std::size_t, std::size_t>& groups, const ParamList<float>& params,
                   const TrainConfig& cfg, const StepFn& step, const EvalFn& eval) {
  if (cfg.batch == 0) throw ConfigError("batch size must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& [k, lengths] : cfg.fbcu_lengths) {
    if (lengths.empty()) throw ConfigError("empty length set for K=" + std::to_string(k));
  }

  History h;
  h.initial_test_sgcs = eval();
  h.initial_mean_test_sgcs = mean_of(h.initial_test_sgcs);

  std::mt19937_64 rng(cfg.seed ^ kShuffleStream);
  numcore::AdamConfig adam;
  adam.lr = cfg.lr;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::map<std::size_t, std::vector<std::size_t>> order;
  for (const auto& [k, count] : groups) {
    order[k].resize(count);
    std::iota(order[k].begin(), order[k].end(), std::size_t{0});
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::map<std::size_t, std::size_t> n_for;
    auto draw = [&](std::size_t k) {
      const auto it = cfg.fbcu_lengths.find(k);
      if (it == cfg.fbcu_lengths.end()) return std::size_t{0};
      std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
      return it->second[pick(rng)];
    };
    std::size_t rounds = 0;
    for (auto& [k, idx] : order) {
      std::shuffle(idx.begin(), idx.end(), rng);
      n_for[k] = draw(k);
      rounds = std::max(rounds, (idx.size() + cfg.batch - 1) / cfg.batch);
    }

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t r = 0; r < rounds; ++r) {
      for (const auto& [k, idx] : order) {
        const std::size_t lo = r * cfg.batch;
        if (lo >= idx.size()) continue;
        const std::size_t hi = std::min(idx.size(), lo + cfg.batch);
        if (cfg.fbcu_per_batch && r > 0) n_for[k] = draw(k);
        BatchSpec spec{k, std::span(idx).subspan(lo, hi - lo), n_for[k]};
        Tape<float> tape;
        Var<float> loss = step(tape, spec);
        const auto w = cfg.group_weights.find(k);
        if (w != cfg.group_weights.end()) loss = numcore::scale(loss, static_cast<float>(w->second));
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
          throw DivergenceError("training loss is not finite at epoch " + std::to_string(epoch) +
                                ", round " + std::to_string(r) + ", K=" + std::to_string(k));
        }
        tape.backward(loss);
        numcore::adam_step(params, adam);
        loss_sum += value;
        ++steps;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    rec.lr = adam.lr;
    rec.test_sgcs = eval();
    rec.mean_test_sgcs = mean_of(rec.test_sgcs);
    h.epochs.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);

    const double metric = rec.test_sgcs.empty() ? -rec.train_loss : rec.mean_test_sgcs;
    if (metric > best) {
      best = metric;
      since_best = 0;
    } else if (++since_best >= cfg.lr_patience) {
      adam.lr = std::max(cfg.lr_floor, adam.lr / 2.0);
      since_best = 0;
    }
  }
  return h;
}

History train(Model<float>& model, std::span<const JointEigenvector> train_set,
              std::span<const JointEigenvector> test_set, const TrainConfig& cfg) {
  const ModelConfig& mc = model.config;
  for (const auto& s : train_set) {
    if (s.width() != mc.features()) throw ConfigError("training sample width disagrees with N_T");
    if (s.k > mc.k_max) throw ConfigError("training sample has more subbands than K_max");
  }
  const auto members = group_by_k(train_set);
  std::map<std::size_t, std::size_t> groups;
  for (const auto& [k, idx] : members) groups[k] = idx.size();
  for (const auto& [k, lengths] : cfg.fbcu_lengths) {
    for (std::size_t n : lengths) {
      if (n < 1 || n > mc.codeword_length(k)) {
        throw ConfigError("length " + std::to_string(n) + " outside [1, " +
                          std::to_string(mc.codeword_length(k)) + "] for K=" + std::to_string(k));
      }
    }
  }

  ParamList<float> params;
  if (cfg.train_encoder) model.enc.collect(params);
  if (cfg.train_decoder) model.dec.collect(params);

  const auto test_groups = group_by_k(test_set);
  EvalFn eval = [&] {
    std::map<std::size_t, double> out;
    if (test_set.empty()) return out;
    EvalOptions opts;
    opts.threads = cfg.eval_threads;
    const auto scores = evaluate_sgcs(model, test_set, opts);
    for (const auto& [k, idx] : test_groups) {
      double s = 0.0;
      for (std::size_t i : idx) s += scores[i];
      out[k] = s / static_cast<double>(idx.size());
    }
    return out;
  };

  StepFn step = [&](Tape<float>& tape, const BatchSpec& b) {
    const auto& all = members.at(b.k);
    std::vector<const Tensor<float>*> batch;
    batch.reserve(b.members.size());
    for (std::size_t i : b.members) batch.push_back(&train_set[all[i]].w);
    const Tensor<float> x = time_major<float>(batch, b.k);
    const auto ev = model.enc.bind(tape, cfg.train_encoder);
    const auto dv = model.dec.bind(tape, cfg.train_decoder);
    const auto chain = feedback_chain(ev, dv, tape.constant(x), b.k, batch.size(), mc, cfg.quantizer, b.n);
    return numcore::scale(sgcs_mean(chain.w_hat, x), -1.0f);
  };

  return train_loop(groups, params, cfg, step, eval);
}

}  // namespace csifb::ablnet
