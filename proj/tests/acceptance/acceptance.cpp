// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csifb/ablnet/network.hpp"
#include "csifb/ablnet/quantizer.hpp"
#include "csifb/ablnet/sgcs.hpp"
#include "csifb/ablnet/train.hpp"
#include "csifb/ablnet/weights.hpp"
#include "csifb/adaptive/bna.hpp"
#include "csifb/adaptive/fbcu.hpp"
#include "csifb/channel/dataset.hpp"
#include "csifb/channel/eigen.hpp"
#include "csifb/cli/commands.hpp"
#include "csifb/numcore/grad_check.hpp"
#include "csifb/numcore/layers.hpp"
#include "csifb/numcore/ops.hpp"
#include "csifb/septrain/septrain.hpp"
#include "unit/oracles.hpp"

namespace fs = std::filesystem;
using namespace csifb;
using ablnet::Model;
using ablnet::ModelConfig;
using channel::JointEigenvector;
using numcore::Tensor;
using cd = std::complex<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- 1: gradients ---------------------------------------------------------------

template <typename T>
numcore::Var<T> probe(numcore::Var<T> x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return numcore::sum(numcore::mul_const(x, oracle::random_tensor(x.value().shape(), rng).template cast<T>()));
}

double primitive_errors(std::uint64_t seed) {
  using namespace numcore;
  std::mt19937_64 rng(seed);
  auto R = [&](std::vector<std::size_t> s) { return oracle::random_tensor(std::move(s), rng); };
  double worst = 0.0;
  auto note = [&](const GradCheckReport& r) { worst = std::max(worst, r.max_rel_error); };
  note(grad_check([&](auto&, auto l) { return probe(dense(l[0], l[1], l[2]), seed); }, {R({3, 4}), R({4, 2}), R({2})}));
  note(grad_check([&](auto&, auto l) { return probe(matmul(l[0], l[1]), seed); }, {R({2, 3}), R({3, 3})}));
  note(grad_check(
      [&](auto&, auto l) {
        using T = typename std::decay_t<decltype(l[0].value())>::value_type;
        return probe(add(add_bias(l[0], l[1]), scale(l[2], T{0.5})), seed);
      },
                  {R({2, 3}), R({3}), R({2, 3})}));
  note(grad_check([&](auto&, auto l) { return probe(sigmoid(l[0]), seed); }, {R({3, 3})}));
  note(grad_check([&](auto&, auto l) { return probe(tanh(l[0]), seed); }, {R({3, 3})}));
  note(grad_check(
      [&](auto&, auto l) {
        using V = std::decay_t<decltype(l[0])>;
        using T = typename std::decay_t<decltype(l[0].value())>::value_type;
        const V parts[] = {slice_cols(l[0], 1, 2), l[1]};
        const V rows[] = {concat_cols<T>(parts), slice_rows(l[2], 0, 2)};
        return probe(concat_rows<T>(rows), seed);
      },
      {R({2, 4}), R({2, 1}), R({3, 3})}));
  const bool mask[] = {true, true, false};
  note(grad_check(
      [&](auto&, auto l) {
        return probe(layer_norm_masked(l[0], l[1], l[2], std::span<const bool>(mask)), seed);
      },
      {R({3, 6}), R({6}), R({6})}));
  note(grad_check([&](auto&, auto l) { return probe(layer_norm(l[0], l[1], l[2]), seed); },
                  {R({3, 6}), R({6}), R({6})}));
  note(grad_check(
      [&](auto&, auto l) {
        using T = typename std::decay_t<decltype(l[0].value())>::value_type;
        return probe(lstm_cell_step(l[0], l[1], LstmVars<T>{l[2], l[3], l[4]}), seed);
      },
      {R({2, 3}), R({2, 8}), R({3, 16}), R({4, 16}), R({16})}));
  note(grad_check(
      [&](auto&, auto l) {
        using T = typename std::decay_t<decltype(l[0].value())>::value_type;
        return probe(gru_cell_step(l[0], l[1], GruVars<T>{l[2], l[3], l[4], l[5]}), seed);
      },
      {R({2, 3}), R({2, 3}), R({3, 9}), R({3, 9}), R({9}), R({9})}));
  for (CellType type : {CellType::lstm, CellType::gru}) {
    const std::size_t gates = type == CellType::lstm ? 12 : 9;
    std::vector<Tensor<double>> leaves{R({3 * 2, 2})};
    for (int d = 0; d < 2; ++d) {
      leaves.push_back(R({2, gates}));
      leaves.push_back(R({3, gates}));
      leaves.push_back(R({gates}));
      leaves.push_back(R({gates}));
    }
    note(grad_check(
        [&](auto&, auto l) {
          using T = typename std::decay_t<decltype(l[0].value())>::value_type;
          BiCellVars<T> cv;
          cv.fwd.type = cv.bwd.type = type;
          if (type == CellType::lstm) {
            cv.fwd.lstm = {l[1], l[2], l[3]};
            cv.bwd.lstm = {l[5], l[6], l[7]};
          } else {
            cv.fwd.gru = {l[1], l[2], l[3], l[4]};
            cv.bwd.gru = {l[5], l[6], l[7], l[8]};
          }
          return probe(bi_sequence(l[0], 3, 2, cv), seed);
        },
        leaves));
    // Single padded sequence: 3 rows, the last one masked off.
    leaves[0] = R({3, 2});
    note(grad_check(
        [&](auto&, auto l) {
          using T = typename std::decay_t<decltype(l[0].value())>::value_type;
          BiCellVars<T> cv;
          cv.fwd.type = cv.bwd.type = type;
          if (type == CellType::lstm) {
            cv.fwd.lstm = {l[1], l[2], l[3]};
            cv.bwd.lstm = {l[5], l[6], l[7]};
          } else {
            cv.fwd.gru = {l[1], l[2], l[3], l[4]};
            cv.bwd.gru = {l[5], l[6], l[7], l[8]};
          }
          return probe(bi_sequence_masked(l[0], std::span<const bool>(mask), cv), seed);
        },
        leaves));
  }
  return worst;
}

double chain_error(ablnet::EncoderArch arch, ablnet::QuantizerMode mode, std::uint64_t seed) {
  using namespace ablnet;
  ModelConfig c;
  c.k_max = 3;
  c.n_t = 2;
  c.hidden1 = 2;
  c.hidden2 = 3;
  c.d = 2;
  c.arch = arch;
  auto model = Model<double>::init(c, seed);
  std::vector<Tensor<double>> leaves;
  for (const auto& np : model.params()) leaves.push_back(np.param->value);
  const std::size_t steps = 3, batch = 2, n = seed % 2 ? 0 : 5;
  std::mt19937_64 rng(seed + 100);
  const auto x = oracle::random_tensor({steps * batch, c.features()}, rng);
  const auto cell = c.encoder_cell();
  Tensor<double> offset({steps * batch, c.d});
  {
    numcore::Tape<double> t;
    const auto cv = encoder_forward(model.enc.bind(t, false), t.constant(x), steps, batch).value();
    for (std::size_t i = 0; i < cv.size(); ++i) offset[i] = quantize_roundtrip(static_cast<float>(cv[i]), c.q) - cv[i];
  }
  // The finite-difference side holds the quantization offset fixed at the
  // base point, which is the function straight-through differentiates.
  return numcore::grad_check<double>(
             [&](auto& tape, auto l) {
               using T = typename std::decay_t<decltype(l[0].value())>::value_type;
               const bool analytic = l[0].requires_grad();
               std::size_t pos = 0;
               const auto ev = EncoderVars<T>::from_leaves(cell, l, pos);
               const auto dv = DecoderVars<T>::from_leaves(l, pos);
               const auto xin = tape.constant(x.template cast<T>());
               numcore::Var<T> w_hat;
               if (analytic) {
                 w_hat = feedback_chain(ev, dv, xin, steps, batch, c, mode, n).w_hat;
               } else {
                 auto ch = encoder_forward(ev, xin, steps, batch);
                 if (mode == QuantizerMode::straight_through) {
                   ch = numcore::add(ch, tape.constant(offset.template cast<T>()));
                 }
                 if (n != 0) ch = numcore::mul_const(ch, truncation_mask<T>(steps, batch, c.d, n));
                 w_hat = decoder_forward(dv, ch, steps, batch);
               }
               return numcore::scale(sgcs_mean(w_hat, x.template cast<T>()), T{-1});
             },
             leaves, 1e-5)
      .max_rel_error;
}

Outcome criterion_1() {
  double prim = 0.0, chain = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    prim = std::max(prim, primitive_errors(seed));
    for (auto arch : {ablnet::EncoderArch::bilstm_base, ablnet::EncoderArch::gru_base}) {
      for (auto mode : {ablnet::QuantizerMode::bypass, ablnet::QuantizerMode::straight_through}) {
        chain = std::max(chain, chain_error(arch, mode, seed));
      }
    }
  }
  return {prim < 1e-3 && chain < 1e-3,
          "max rel error: primitives " + fmt("%.2e", prim) + ", full chain " + fmt("%.2e", chain) + " (10 seeds)"};
}

// ---- 2: eigen pipeline ------------------------------------------------------------

Outcome criterion_2() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  double worst_res = 0.0, worst_agree = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + trial % 8);
    channel::CMatrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
    const channel::CMatrix r = a.adjoint() * a;
    const auto e = channel::dominant_eigenpair(r);
    const double res = channel::eigen_residual(r, e) / std::max(e.lambda, 1e-12);
    oracle::CMat o(static_cast<std::size_t>(n), std::vector<cd>(static_cast<std::size_t>(n)));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) o[i][j] = r(i, j);
    const auto jo = oracle::jacobi_dominant(o);
    cd overlap = 0;
    for (Eigen::Index i = 0; i < n; ++i) overlap += std::conj(jo.w[static_cast<std::size_t>(i)]) * e.w[i];
    const double agree = std::max(std::abs(e.lambda - jo.lambda) / std::max(1.0, jo.lambda),
                                  std::abs(std::abs(overlap) - 1.0));
    worst_res = std::max(worst_res, res);
    worst_agree = std::max(worst_agree, agree);
    ok = ok && res <= 1e-6 && agree <= 1e-6;
  }
  return {ok, "100 PSD matrices up to 8x8: max residual/lambda " + fmt("%.2e", worst_res) +
                  ", max Jacobi disagreement " + fmt("%.2e", worst_agree)};
}

// ---- 3: SGCS properties ----------------------------------------------------------

JointEigenvector random_joint(std::size_t k, std::size_t k_max, std::size_t n_t, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<std::vector<double>> rows(k, std::vector<double>(2 * n_t));
  for (auto& r : rows)
    for (auto& v : r) v = d(rng);
  return channel::build_joint(rows, k_max);
}

Outcome criterion_3() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI), scale(0.1, 10.0);
  double id_err = 0.0, inv_err = 0.0, oracle_err = 0.0, lo = 1.0, hi = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + trial % 12;
    const auto w = random_joint(k, 12, 8, rng);
    const auto v = random_joint(k, 12, 8, rng);
    id_err = std::max(id_err, std::abs(ablnet::sgcs(w, w) - 1.0));
    const double base = ablnet::sgcs(w, v);
    double ref = 0.0;
    for (std::size_t r = 0; r < k; ++r)
      ref += oracle::sgcs_complex(oracle::complex_row(w.w.row(r)), oracle::complex_row(v.w.row(r)));
    oracle_err = std::max(oracle_err, std::abs(base - ref / static_cast<double>(k)));
    lo = std::min(lo, base);
    hi = std::max(hi, base);
    JointEigenvector rot = v;
    for (std::size_t r = 0; r < k; ++r) {
      const cd e = std::polar(scale(rng), phase(rng));
      auto row = rot.w.row(r);
      for (std::size_t j = 0; j < row.size(); j += 2) {
        const cd z = cd(row[j], row[j + 1]) * e;
        row[j] = static_cast<float>(z.real());
        row[j + 1] = static_cast<float>(z.imag());
      }
    }
    inv_err = std::max(inv_err, std::abs(ablnet::sgcs(w, rot) - base));
  }
  return {id_err <= 1e-6 && inv_err <= 1e-6 && oracle_err <= 1e-6 && lo >= 0.0 && hi <= 1.0,
          "identity error " + fmt("%.1e", id_err) + ", oracle error " + fmt("%.1e", oracle_err) + ", phase/scale error " + fmt("%.1e", inv_err) + ", range [" +
              fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "] over 1000 pairs"};
}

// ---- 4: quantizer ----------------------------------------------------------------

Outcome criterion_4() {
  std::size_t violations = 0;
  double worst = 0.0;
  for (unsigned q = 1; q <= 4; ++q) {
    const double bound = std::ldexp(1.0, -static_cast<int>(q + 1));
    for (int i = 0; i < 10000; ++i) {
      const float x = static_cast<float>(i) * 1e-4f;
      const double err = std::abs(static_cast<double>(ablnet::quantize_roundtrip(x, q)) - static_cast<double>(x));
      worst = std::max(worst, err / bound);
      if (err > bound) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations for q=1..4, worst error " + fmt("%.4f", worst) +
                               " of the bound"};
}

// ---- 5, 6: proportionality and padding ---------------------------------------------

std::vector<JointEigenvector> channel_set(channel::Profile p, std::size_t n_t, std::size_t k, std::size_t k_max,
                                          std::size_t count, std::uint64_t first, std::uint64_t seed) {
  channel::ChannelConfig cc;
  cc.n_t = n_t;
  cc.n_r = 2;
  cc.k = k;
  cc.seed = seed;
  cc = channel::with_profile(cc, p);
  return channel::generate_dataset(cc, k_max, count, first, channel::Split::unspecified).samples;
}

ModelConfig desk_config(std::size_t k_max) {
  ModelConfig c;
  c.k_max = k_max;
  c.n_t = 8;
  c.hidden1 = 32;
  c.hidden2 = 64;
  return c;
}

Outcome criterion_5() {
  const ModelConfig c = desk_config(12);
  const auto m = Model<float>::init(c, 5);
  std::string detail;
  bool ok = true;
  for (std::size_t k : {3, 6, 12}) {
    const auto w = channel_set(channel::Profile::A, 8, k, 12, 1, 0, 55)[0];
    const auto s = ablnet::quantize(ablnet::encode(w, m.enc, c).values, c.q);
    const double ratio = static_cast<double>(s.bits()) / static_cast<double>(k);
    ok = ok && ratio == 10.0 && s.bits() == 10 * k;
    detail += "K=" + std::to_string(k) + ": " + std::to_string(s.bits()) + " bits; ";
  }
  return {ok, detail + "Q/K = 10"};
}

Outcome criterion_6() {
  const ModelConfig c = desk_config(12);
  const auto m = Model<float>::init(c, 6);
  std::size_t mismatches = 0, checked = 0;
  for (std::size_t k : {3, 6, 12}) {
    for (const auto& w : channel_set(channel::Profile::A, 8, k, k, 100, 0, 66 + k)) {
      const auto w12 = channel::repad(w, 12);
      const auto a = ablnet::encode(w, m.enc, c), b = ablnet::encode(w12, m.enc, c);
      const auto sa = ablnet::quantize(a.values, c.q), sb = ablnet::quantize(b.values, c.q);
      auto ca = ablnet::dequantize(sa), cb = ablnet::dequantize(sb);
      cb.resize(12 * c.d, 0.0f);
      const auto ra = ablnet::decode(ca, k, m.dec, c), rb = ablnet::decode(cb, k, m.dec, c);
      if (a.values != b.values || !(sa == sb) || !(channel::repad(ra, 12) == rb)) ++mismatches;
      ++checked;
    }
  }
  return {mismatches == 0, std::to_string(checked) + " samples, " + std::to_string(mismatches) +
                               " differ between K_max=K and K_max=12"};
}

// ---- 7, 8, 9: desk-scale model ------------------------------------------------------

struct Desk {
  Model<float> model;
  std::vector<JointEigenvector> train, test;
  ablnet::History history;
  std::map<std::size_t, adaptive::LengthSet> sets;
  double seconds = 0.0;
  bool ready = false;
};

Desk& desk() {
  static Desk d;
  if (d.ready) return d;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t k : {3, 6}) {
    const auto tr = channel_set(channel::Profile::A, 8, k, 6, 4096, 0, 700 + k);
    const auto te = channel_set(channel::Profile::A, 8, k, 6, 512, 4096, 700 + k);
    d.train.insert(d.train.end(), tr.begin(), tr.end());
    d.test.insert(d.test.end(), te.begin(), te.end());
    d.sets[k] = adaptive::default_length_set(k, 5);
  }
  d.model = Model<float>::init(desk_config(6), 7);
  ablnet::TrainConfig tc;
  tc.epochs = 100;
  tc.batch = 64;
  tc.lr = 1e-3;
  tc.seed = 7;
  for (const auto& [k, s] : d.sets) tc.fbcu_lengths[k] = s.lengths;
  tc.on_epoch = [](const ablnet::EpochRecord& r) {
    if (r.epoch % 10 == 0) {
      std::printf("  epoch %3zu  loss %.4f  test SGCS %.4f\n", r.epoch, r.train_loss, r.mean_test_sgcs);
      std::fflush(stdout);
    }
  };
  d.history = ablnet::train(d.model, d.train, d.test, tc);
  d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  d.ready = true;
  return d;
}

std::vector<JointEigenvector> with_k(std::span<const JointEigenvector> all, std::size_t k) {
  std::vector<JointEigenvector> out;
  for (const auto& w : all)
    if (w.k == k) out.push_back(w);
  return out;
}

Outcome criterion_7() {
  Desk& d = desk();
  const double initial = d.history.initial_mean_test_sgcs;
  const double final_sgcs = d.history.epochs.back().mean_test_sgcs;
  std::string per_k;
  for (const auto& [k, v] : d.history.epochs.back().test_sgcs) per_k += " K=" + std::to_string(k) + ":" + fmt("%.4f", v);
  return {final_sgcs - initial >= 0.3 && final_sgcs >= 0.85,
          "untrained " + fmt("%.4f", initial) + ", after 100 epochs " + fmt("%.4f", final_sgcs) + " (" + per_k.substr(1) +
              "), gain " + fmt("%.4f", final_sgcs - initial) + ", " + fmt("%.0f", d.seconds) + " s"};
}

Outcome criterion_8() {
  Desk& d = desk();
  bool ok = true;
  std::string detail;
  for (const auto& [k, set] : d.sets) {
    const auto test = with_k(d.test, k);
    double prev = -1.0, worst_drop = 0.0;
    std::string curve;
    for (std::size_t n : set.lengths) {
      ablnet::EvalOptions o;
      o.n = n;
      const double s = ablnet::mean(ablnet::evaluate_sgcs(d.model, test, o));
      if (prev >= 0.0) worst_drop = std::max(worst_drop, prev - s);
      prev = s;
      curve += fmt(" %.3f", s);
    }
    ok = ok && worst_drop <= 0.01;
    detail += "K=" + std::to_string(k) + " n=" + std::to_string(set.min()) + ".." + std::to_string(set.max()) + ":" +
              curve + " (largest drop " + fmt("%.4f", worst_drop) + "); ";
  }
  return {ok, detail};
}

Outcome criterion_9() {
  Desk& d = desk();
  auto full = ablnet::evaluate_sgcs(d.model, d.test);
  std::sort(full.begin(), full.end());
  const double median = 0.5 * (full[full.size() / 2 - 1] + full[full.size() / 2]);
  adaptive::BnaSweepConfig sc;
  sc.rho_t = median;
  sc.eps = 0.01;
  const unsigned q = d.model.config.q;
  for (const auto& [k, set] : d.sets) sc.bounds[k] = {set.min() * q, set.max() * q, (set.min() + set.max()) / 2 * q};
  const auto sweep = adaptive::bna_sweep(d.test, d.model.enc, d.model.dec, d.model.config, sc);

  std::size_t free = 0, free_hit = 0, eval_violations = 0, clamp_violations = 0, clamped = 0;
  std::vector<double> rho_i, rho_a;
  for (const auto& r : sweep.rows) {
    const auto& set = d.sets.at(r.k);
    std::size_t bound = 0;
    while ((std::size_t{1} << bound) < set.lengths.size()) ++bound;
    if (r.result.evals > bound + 1) ++eval_violations;
    if (r.result.clamped == adaptive::Clamp::none) {
      ++free;
      free_hit += std::abs(r.result.rho_a - sc.rho_t) <= sc.eps ? 1 : 0;
    } else {
      ++clamped;
      const std::size_t want = r.result.clamped == adaptive::Clamp::min ? sc.bounds[r.k].q_min : sc.bounds[r.k].q_max;
      if (r.result.q_a != want) ++clamp_violations;
    }
    rho_i.push_back(r.rho_i);
    rho_a.push_back(r.result.rho_a);
  }
  const double hit_rate = free ? static_cast<double>(free_hit) / static_cast<double>(free) : 0.0;
  const double at = sc.rho_t + sc.eps;
  const double gain = adaptive::empirical_cdf(rho_a, at) - adaptive::empirical_cdf(rho_i, at);
  const bool ok = hit_rate >= 0.7 && eval_violations == 0 && clamp_violations == 0 && gain >= 0.2;
  return {ok, "rho_t " + fmt("%.4f", sc.rho_t) + "; (a) " + std::to_string(free_hit) + "/" + std::to_string(free) +
                  " non-clamped in band (" + fmt("%.1f%%", 100.0 * hit_rate) + "); (b) " +
                  std::to_string(eval_violations) + " eval-bound violations; (c) " + std::to_string(clamped) +
                  " clamped, " + std::to_string(clamp_violations) + " off-bound; (d) CDF gain at rho_t+eps " +
                  fmt("%.3f", gain) + "; mean Q_i " + fmt("%.1f", sweep.summary.mean_q_i) + " -> mean Q_a " +
                  fmt("%.1f", sweep.summary.mean_q_a)};
}

// ---- 10: separate training ---------------------------------------------------------

Outcome criterion_10() {
  septrain::SeptrainConfig cfg;
  cfg.model = desk_config(6);
  cfg.ues = {{1, ablnet::EncoderArch::bilstm_base, channel::Profile::C},
             {2, ablnet::EncoderArch::bilstm_wide, channel::Profile::A},
             {3, ablnet::EncoderArch::gru_base, channel::Profile::A}};
  cfg.subbands = {6};
  cfg.train_per_k = 6144;
  cfg.test_per_k = 256;
  ablnet::TrainConfig t;
  t.epochs = 30;
  t.batch = 64;
  t.lr = 1e-3;
  cfg.ue_train = cfg.pretrain = t;
  // Decoder-only epochs are cheap, so the decoder stages get twice the budget.
  t.epochs = 60;
  cfg.decoder_train = cfg.finetune = t;
  cfg.seed = 10;
  const auto start = std::chrono::steady_clock::now();
  const auto rep = septrain::run_septrain(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = rep.mean_ue_first >= rep.mean_gnb_first - 0.01;
  double worst_gap = 0.0;
  std::string detail;
  for (const auto& r : rep.rows) {
    worst_gap = std::max(worst_gap, std::abs(r.ue_first - r.joint));
    ok = ok && std::abs(r.ue_first - r.joint) <= 0.05;
    detail += "UE" + std::to_string(r.ue_id) + " " + r.arch + "/" + r.profile + ": joint " + fmt("%.4f", r.joint) +
              ", general " + fmt("%.4f", r.ue_first) + ", gNB-first " + fmt("%.4f", r.gnb_first) + "; ";
  }
  return {ok, detail + "largest general-vs-joint gap " + fmt("%.4f", worst_gap) + "; mean UE-first " +
                  fmt("%.4f", rep.mean_ue_first) + " vs gNB-first " + fmt("%.4f", rep.mean_gnb_first) + ", " + fmt("%.0f", secs) + " s"};
}

// ---- 11: serialization and reruns ---------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "csifb");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome criterion_11() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  // In-memory roundtrips.
  channel::Dataset ds;
  ds.k_max = 6;
  ds.n_t = 8;
  ds.seed = 11;
  ds.samples = channel_set(channel::Profile::C, 8, 3, 6, 20, 0, 11);
  const auto db = channel::encode_dataset(ds);
  expect(channel::encode_dataset(channel::decode_dataset(db)) == db, "dataset");

  const auto m = Model<float>::init(desk_config(6), 11);
  const auto wb = ablnet::encode_weights(ablnet::model_records(m.config, &m.enc, &m.dec));
  const auto mw = ablnet::weights_from_records(ablnet::decode_weights(wb));
  expect(mw.enc && mw.dec &&
             ablnet::encode_weights(ablnet::model_records(mw.config, &*mw.enc, &*mw.dec)) == wb,
         "weights");

  const septrain::UeEncoder ue(4, m.config, m.enc);
  const auto pairs = septrain::emit_pairs(ue, ds.samples);
  const auto pb = septrain::encode_pairs(pairs);
  expect(septrain::encode_pairs(septrain::decode_pairs(pb)) == pb, "pair file");

  std::mt19937_64 rng(11);
  for (unsigned q = 1; q <= 16; ++q) {
    std::vector<std::uint32_t> sym(1 + rng() % 50);
    for (auto& s : sym) s = static_cast<std::uint32_t>(rng() % (1u << q));
    const auto bs = ablnet::pack_symbols(sym, q);
    expect(bs.symbols() == sym && ablnet::pack_symbols(bs.symbols(), q) == bs, "bitstream q=" + std::to_string(q));
  }

  // Deterministic reruns of every command.
  const fs::path root = fs::temp_directory_path() / "csifb_acceptance_11";
  fs::remove_all(root);
  const fs::path dir = root / "run", first = root / "first";
  const std::vector<std::string> common{"--quiet", "--seed", "7", "--threads", "1", "--reproducible"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  for (int pass = 0; pass < 2; ++pass) {
    if (pass == 1) {
      fs::copy(dir, first, fs::copy_options::recursive);
      fs::remove_all(dir);
    }
    const std::string d = (dir / "d").string();
    const std::string train = d + "/A_K3_train.csie," + d + "/A_K6_train.csie";
    const std::string test = d + "/A_K3_test.csie," + d + "/A_K6_test.csie";
    int rc = cli(with({"gen-data", "--out", d, "--set", "channel.n_t=4", "--set", "data.train=48", "--set",
                       "data.test=12"}));
    rc |= cli(with({"train", "--out", (dir / "m").string(), "--set", "data.train=" + train, "--set", "data.test=" + test,
                    "--set", "model.hidden1=4", "--set", "model.hidden2=6", "--set", "train.epochs=2", "--set",
                    "train.batch=16", "--set", "train.fbcu=default"}));
    const std::string model = (dir / "m" / "model.ablw").string();
    rc |= cli(with({"eval", "--out", (dir / "e").string(), "--set", "eval.model=" + model, "--set", "eval.data=" + test,
                    "--set", "eval.q_grid=20,30"}));
    rc |= cli(with({"bna", "--out", (dir / "b").string(), "--set", "bna.model=" + model, "--set", "bna.data=" + test,
                    "--set", "bna.rho_t=median"}));
    rc |= cli(with({"septrain", "--out", (dir / "s").string(), "--set", "model.n_t=4", "--set", "model.hidden1=3",
                    "--set", "model.hidden2=4", "--set", "septrain.subbands=2", "--set", "septrain.train_per_k=16",
                    "--set", "septrain.test_per_k=8", "--set", "ue_train.epochs=1", "--set", "decoder_train.epochs=1",
                    "--set", "pretrain.epochs=1", "--set", "finetune.epochs=1"}));
    expect(rc == 0, "CLI exit codes");
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(first)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), first);
    expect(fs::exists(dir / rel) && slurp(e.path()) == slurp(dir / rel), "rerun " + rel.string());
  }
  fs::remove_all(root);
  std::string detail = "dataset, weights, pair file and bitstream roundtrips; " + std::to_string(files) +
                       " CLI artifacts compared across reruns";
  if (!failed.empty()) {
    detail += "; mismatched:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", criterion_1},   {"eigen pipeline", criterion_2},
      {"SGCS properties", criterion_3},        {"quantizer grid sweep", criterion_4},
      {"bits proportional to K", criterion_5}, {"padding invariance", criterion_6},
      {"desk-scale learning", criterion_7},    {"FBCU monotone trend", criterion_8},
      {"BNA behaviour", criterion_9},          {"separate training", criterion_10},
      {"serialization and reruns", criterion_11},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
