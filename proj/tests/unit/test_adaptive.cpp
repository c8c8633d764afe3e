#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "csifb/ablnet/network.hpp"
#include "csifb/adaptive/bna.hpp"
#include "csifb/adaptive/fbcu.hpp"
#include "csifb/channel/dataset.hpp"
#include "csifb/errors.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace csifb::adaptive;
using csifb::ablnet::Model;
using csifb::ablnet::ModelConfig;
using csifb::channel::JointEigenvector;

namespace {

ModelConfig tiny_config(std::size_t k_max = 6) {
  ModelConfig c;
  c.k_max = k_max;
  c.n_t = 4;
  c.hidden1 = 3;
  c.hidden2 = 4;
  return c;
}

std::vector<JointEigenvector> channel_samples(std::size_t k, std::size_t k_max, std::size_t count,
                                              std::uint64_t seed) {
  csifb::channel::ChannelConfig cc;
  cc.n_t = 4;
  cc.n_r = 2;
  cc.k = k;
  cc.seed = seed;
  cc = csifb::channel::with_profile(cc, csifb::channel::Profile::A);
  return csifb::channel::generate_dataset(cc, k_max, count, 0, csifb::channel::Split::test).samples;
}

// Algorithm 1 run literally on bit counts with steps of q; returns the
// midpoints visited and the final (Q, rho).
struct OracleRun {
  std::vector<std::size_t> q_trace;
  std::size_t q = 0;
  double rho = 0.0;
};

OracleRun oracle_bna(const std::function<double(std::size_t)>& rho_of, std::size_t q_i, double rho_i, double rho_t,
                     double eps, std::size_t q_min, std::size_t q_max, std::size_t q) {
  OracleRun run{{}, q_i, rho_i};
  if (std::abs(rho_i - rho_t) <= eps) return run;
  long l, r;
  if (rho_i - rho_t > eps) {
    l = static_cast<long>(q_min / q);
    r = static_cast<long>(q_i / q);
  } else {
    l = static_cast<long>(q_i / q);
    r = static_cast<long>(q_max / q);
  }
  while (l <= r) {
    const long mid = (l + r) / 2;
    run.q = static_cast<std::size_t>(mid) * q;
    run.rho = rho_of(run.q);
    run.q_trace.push_back(run.q);
    if (std::abs(run.rho - rho_t) <= eps) return run;
    if (run.rho - rho_t < -eps) {
      l = mid + 1;
    } else {
      r = mid - 1;
    }
  }
  return run;
}

std::vector<float> iota_floats(std::size_t n) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(i + 1) / 100.0f;
  return v;
}

}  // namespace

TEST_CASE("truncation keeps the leading floats") {
  const auto c = iota_floats(60);
  CHECK(fbcu_truncate(c, 60) == c);
  const auto t = fbcu_truncate(c, 40);
  REQUIRE(t.size() == 40);
  CHECK(std::equal(t.begin(), t.end(), c.begin()));
  CHECK(csifb::ablnet::quantize(t, 2).bits() == 80);
  CHECK_THROWS_AS(fbcu_truncate(c, 0), csifb::RangeError);
  CHECK_THROWS_AS(fbcu_truncate(c, 61), csifb::RangeError);
}

TEST_CASE("padding appends zeros up to the full length") {
  const auto c = iota_floats(60);
  CHECK(fbcu_pad(c, 60) == c);
  const auto p = fbcu_pad(fbcu_truncate(c, 40), 60);
  REQUIRE(p.size() == 60);
  for (std::size_t i = 0; i < 60; ++i) CHECK(p[i] == (i < 40 ? c[i] : 0.0f));
  CHECK_THROWS_AS(fbcu_pad(c, 59), csifb::RangeError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng() % 60, n = 1 + rng() % m, total = m + rng() % 10;
    std::vector<float> v(m);
    for (auto& x : v) x = u(rng);
    const auto r = fbcu_pad(fbcu_truncate(v, n), total);
    REQUIRE(r.size() == total);
    for (std::size_t i = 0; i < total; ++i) REQUIRE(r[i] == (i < n ? v[i] : 0.0f));
  }
}

TEST_CASE("truncated bitstreams carry n*q bits") {
  for (unsigned q = 1; q <= 4; ++q) {
    for (std::size_t n = 1; n <= 60; ++n) {
      const auto s = csifb::ablnet::quantize(fbcu_truncate(iota_floats(60), n), q);
      CHECK(s.bits() == n * q);
      CHECK(s.bytes.size() == (n * q + 7) / 8);
    }
  }
}

TEST_CASE("length sets") {
  CHECK(default_length_set(3, 5).lengths == std::vector<std::size_t>{10, 11, 12, 13, 14, 15});
  const auto s6 = default_length_set(6, 5);
  CHECK(s6.min() == 20);
  CHECK(s6.max() == 30);
  CHECK(s6.lengths.size() == 11);
  const auto s12 = default_length_set(12, 5);
  CHECK(s12.min() == 40);
  CHECK(s12.max() == 60);
  CHECK(make_length_set(3, {15, 10, 12, 10}, 5).lengths == std::vector<std::size_t>{10, 12, 15});
  CHECK_THROWS_AS(make_length_set(3, {}, 5), csifb::ConfigError);
  CHECK_THROWS_AS(make_length_set(3, {16}, 5), csifb::ConfigError);
  CHECK_THROWS_AS(make_length_set(3, {0, 4}, 5), csifb::ConfigError);
}

TEST_CASE("codeword length sampling is uniform over the set") {
  std::mt19937_64 rng(11);
  const std::vector<std::size_t> single{7};
  for (int i = 0; i < 20; ++i) CHECK(sample_codeword_length(single, rng) == 7);
  CHECK_THROWS_AS(sample_codeword_length(std::vector<std::size_t>{}, rng), csifb::InvalidInput);

  const auto set = default_length_set(3, 5);
  const int draws = 6000;
  std::map<std::size_t, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[sample_codeword_length(set, rng)];
  REQUIRE(counts.size() == 6);
  double chi2 = 0.0;
  const double expected = draws / 6.0;
  for (const auto& [n, c] : counts) {
    CHECK(n >= 10);
    CHECK(n <= 15);
    CHECK(std::abs(c / double(draws) - 1.0 / 6.0) <= 0.02);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // 5 degrees of freedom, 1% critical value.
  CHECK(chi2 < 15.086);
}

TEST_CASE("feedback roundtrip composes encode, truncation, quantization and decode") {
  const ModelConfig c = tiny_config(6);
  const auto m = Model<float>::init(c, 9);
  const auto samples = channel_samples(4, 6, 12, 21);
  csifb::ablnet::EvalOptions full;
  const auto ref = csifb::ablnet::evaluate_sgcs(m, samples, full);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto r = feedback_roundtrip(samples[i], 4 * c.d, m.enc, m.dec, c);
    CHECK(r.s.bits() == 4 * c.d * c.q);
    CHECK(r.rho == doctest::Approx(ref[i]).epsilon(1e-6));
    CHECK(r.w_hat.k_max() == 6);
    for (std::size_t n : {1, 7, 13}) {
      csifb::ablnet::EvalOptions o;
      o.n = n;
      const auto rt = feedback_roundtrip(samples[i], n, m.enc, m.dec, c);
      CHECK(rt.s.n_symbols == n);
      CHECK(rt.rho == doctest::Approx(csifb::ablnet::evaluate_sgcs(m, std::span(&samples[i], 1), o)[0]).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(feedback_roundtrip(samples[0], 21, m.enc, m.dec, c), csifb::RangeError);
}

TEST_CASE("bna keeps an in-band initial point without evaluating") {
  int calls = 0;
  const BnaEval eval = [&](std::size_t) {
    ++calls;
    return 0.0;
  };
  const BnaConfig cfg{0.90, 0.01, 40, 120, 2};
  const auto r = bna_adjust(eval, 48, 0.905, cfg);
  CHECK(calls == 0);
  CHECK(r.evals == 0);
  CHECK(r.q_a == 48);
  CHECK(r.rho_a == 0.905);
  CHECK(r.hit_band);
  CHECK(r.clamped == Clamp::none);
}

TEST_CASE("bna reproduces the scripted midpoint trace") {
  const auto rho = [](std::size_t q) { return std::min(1.0, 0.5 + static_cast<double>(q) / 200.0); };
  int calls = 0;
  const BnaEval eval = [&](std::size_t q) {
    ++calls;
    return rho(q);
  };
  const BnaConfig cfg{0.90, 0.01, 40, 120, 2};
  const auto r = bna_adjust(eval, 48, rho(48), cfg);
  const auto o = oracle_bna(rho, 48, rho(48), 0.90, 0.01, 40, 120, 2);
  CHECK(r.trace == std::vector<std::size_t>{42, 32, 37, 39, 40});
  std::vector<std::size_t> bits;
  for (std::size_t n : r.trace) bits.push_back(n * 2);
  CHECK(bits == o.q_trace);
  CHECK(r.q_a == 80);
  CHECK(r.q_a == o.q);
  CHECK(r.rho_a == doctest::Approx(0.90));
  CHECK(r.hit_band);
  CHECK(r.evals == 5);
  CHECK(calls == 5);
  CHECK(r.evals <= bna_eval_bound(cfg));
}

TEST_CASE("bna clamps at the bounds when the band is out of reach") {
  const BnaConfig cfg{0.90, 0.01, 40, 120, 2};
  const auto low = bna_adjust([](std::size_t) { return 0.5; }, 48, 0.5, cfg);
  CHECK(low.q_a == 120);
  CHECK(low.clamped == Clamp::max);
  CHECK_FALSE(low.hit_band);
  const auto high = bna_adjust([](std::size_t) { return 0.99; }, 48, 0.99, cfg);
  CHECK(high.q_a == 40);
  CHECK(high.clamped == Clamp::min);
  CHECK_FALSE(high.hit_band);
  // Already at the bound: nothing new to evaluate.
  int calls = 0;
  const auto top = bna_adjust(
      [&](std::size_t) {
        ++calls;
        return 0.5;
      },
      120, 0.5, cfg);
  CHECK(calls == 0);
  CHECK(top.q_a == 120);
  CHECK(top.clamped == Clamp::max);
}

TEST_CASE("bna argument and eval errors") {
  const BnaConfig cfg{0.90, 0.01, 40, 120, 2};
  const BnaEval eval = [](std::size_t) { return 0.5; };
  CHECK_THROWS_AS(bna_adjust(eval, 38, 0.5, cfg), csifb::RangeError);
  CHECK_THROWS_AS(bna_adjust(eval, 122, 0.5, cfg), csifb::RangeError);
  CHECK_THROWS_AS(bna_adjust(eval, 49, 0.5, cfg), csifb::RangeError);
  CHECK_THROWS_AS(bna_adjust(eval, 48, 0.5, BnaConfig{0.9, 0.01, 41, 120, 2}), csifb::ConfigError);
  CHECK_THROWS_AS(bna_adjust(eval, 48, 0.5, BnaConfig{1.2, 0.01, 40, 120, 2}), csifb::ConfigError);
  CHECK_THROWS_AS(bna_adjust(eval, 48, 0.5, BnaConfig{0.9, 0.0, 40, 120, 2}), csifb::ConfigError);
  CHECK_THROWS_AS(bna_adjust([](std::size_t) -> double { throw std::runtime_error("decoder failed"); }, 48, 0.5, cfg),
                  std::runtime_error);
}

TEST_CASE("bna on random increasing curves hits the band whenever it can") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const unsigned q = 1 + static_cast<unsigned>(rng() % 4);
    const std::size_t n_min = 1 + rng() % 20, n_max = n_min + rng() % 60;
    const BnaConfig cfg{0.5 + 0.45 * u(rng), 0.005 + 0.02 * u(rng), n_min * q, n_max * q, q};
    // Strictly increasing table over the admissible n.
    std::map<std::size_t, double> table;
    double v = u(rng) * 0.6;
    for (std::size_t n = n_min; n <= n_max; ++n) {
      table[n * q] = v;
      v += 0.001 + 0.05 * u(rng);
    }
    const std::size_t q_i = (n_min + rng() % (n_max - n_min + 1)) * q;
    std::set<std::size_t> asked;
    const auto r = bna_adjust(
        [&](std::size_t bits) {
          asked.insert(bits);
          return table.at(bits);
        },
        q_i, table.at(q_i), cfg);
    const bool reachable = std::any_of(table.begin(), table.end(),
                                       [&](const auto& e) { return std::abs(e.second - cfg.rho_t) <= cfg.eps; });
    REQUIRE(r.q_a % q == 0);
    REQUIRE(r.q_a >= cfg.q_min);
    REQUIRE(r.q_a <= cfg.q_max);
    REQUIRE(r.evals == asked.size());
    REQUIRE(r.evals <= bna_eval_bound(cfg));
    REQUIRE(r.rho_a == table.at(r.q_a));
    REQUIRE(r.hit_band == reachable);
    if (reachable) REQUIRE(std::abs(r.rho_a - cfg.rho_t) <= cfg.eps);
    const auto o = oracle_bna([&](std::size_t b) { return table.at(b); }, q_i, table.at(q_i), cfg.rho_t, cfg.eps,
                              cfg.q_min, cfg.q_max, q);
    REQUIRE(r.q_a == o.q);
    if (r.clamped == Clamp::max) REQUIRE(r.q_a == cfg.q_max);
    if (r.clamped == Clamp::min) REQUIRE(r.q_a == cfg.q_min);
  }
}

TEST_CASE("bna terminates within the eval bound on non-monotone curves") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n_min = 1 + rng() % 10, n_max = n_min + rng() % 80;
    const BnaConfig cfg{0.9, 0.01, n_min * 2, n_max * 2, 2};
    std::map<std::size_t, double> table;
    for (std::size_t n = n_min; n <= n_max; ++n) table[2 * n] = 0.8 + 0.2 * u(rng);
    const std::size_t q_i = 2 * (n_min + rng() % (n_max - n_min + 1));
    const auto r = bna_adjust([&](std::size_t b) { return table.at(b); }, q_i, table.at(q_i), cfg);
    REQUIRE(r.evals <= bna_eval_bound(cfg));
    REQUIRE(r.q_a >= cfg.q_min);
    REQUIRE(r.q_a <= cfg.q_max);
    REQUIRE(r.hit_band == (std::abs(r.rho_a - 0.9) <= 0.01));
  }
}

TEST_CASE("bna eval bound") {
  CHECK(bna_eval_bound(BnaConfig{0.9, 0.01, 40, 120, 2}) == 7);  // 41 lengths
  CHECK(bna_eval_bound(BnaConfig{0.9, 0.01, 20, 30, 2}) == 4);   // 6 lengths
  CHECK(bna_eval_bound(BnaConfig{0.9, 0.01, 20, 20, 2}) == 1);
}

TEST_CASE("bna sweep with an input-independent decoder needs no adjustment") {
  ModelConfig c = tiny_config(6);
  auto m = Model<float>::init(c, 3);
  for (auto& np : m.dec.params()) np.param->value.fill(0.0f);
  std::vector<double> row(c.features());
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = std::sin(1.0 + static_cast<double>(j));
  m.dec.norm.bias.value = csifb::numcore::Tensor<float>({c.features()});
  for (std::size_t j = 0; j < row.size(); ++j) m.dec.norm.bias.value[j] = static_cast<float>(row[j]);
  // Every sample equals the decoder's constant output up to scale.
  std::vector<JointEigenvector> samples;
  for (int i = 0; i < 5; ++i) {
    std::vector<std::vector<double>> rows(3, row);
    for (auto& r : rows)
      for (auto& v : r) v = static_cast<float>(v) * (1.0 + i);
    samples.push_back(csifb::channel::build_joint(rows, 6));
  }
  BnaSweepConfig cfg;
  cfg.rho_t = 1.0;
  cfg.bounds[3] = {20, 30, 24};
  const auto sweep = bna_sweep(samples, m.enc, m.dec, c, cfg);
  for (const auto& r : sweep.rows) {
    CHECK(r.result.evals == 0);
    CHECK(r.result.q_a == 24);
    CHECK(r.rho_i == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(sweep.summary.mean_q_a == 24.0);
  CHECK(sweep.summary.hits == 5);
}

TEST_CASE("bna sweep rows, summary, reports and thread independence") {
  const ModelConfig c = tiny_config(6);
  const auto m = Model<float>::init(c, 12);
  auto samples = channel_samples(3, 6, 20, 4);
  const auto more = channel_samples(6, 6, 20, 5);
  samples.insert(samples.end(), more.begin(), more.end());
  BnaSweepConfig cfg;
  cfg.rho_t = 0.3;
  cfg.eps = 0.01;
  cfg.bounds[3] = {20, 30, 24};
  cfg.bounds[6] = {40, 60, 48};
  const auto a = bna_sweep(samples, m.enc, m.dec, c, cfg);
  cfg.threads = 4;
  const auto b = bna_sweep(samples, m.enc, m.dec, c, cfg);
  REQUIRE(a.rows.size() == samples.size());
  std::ostringstream csv_a, csv_b;
  write_sweep_csv(csv_a, a.rows);
  write_sweep_csv(csv_b, b.rows);
  CHECK(csv_a.str() == csv_b.str());

  for (const auto& r : a.rows) {
    const BnaConfig bc{cfg.rho_t, cfg.eps, cfg.bounds.at(r.k).q_min, cfg.bounds.at(r.k).q_max, c.q};
    CHECK(r.result.evals <= bna_eval_bound(bc));
    CHECK(r.rho_i == doctest::Approx(feedback_roundtrip(samples[r.sample_id], r.q_i / c.q, m.enc, m.dec, c).rho));
    CHECK(r.result.rho_a ==
          doctest::Approx(feedback_roundtrip(samples[r.sample_id], r.result.q_a / c.q, m.enc, m.dec, c).rho));
  }

  std::istringstream lines(csv_a.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "sample_id,K,Q_i,rho_i,Q_a,rho_a,evals,clamped,hit_band");
  std::size_t n_lines = 0;
  while (std::getline(lines, line)) {
    ++n_lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }
  CHECK(n_lines == samples.size());

  const auto j = nlohmann::json::parse(summary_json(a.summary, cfg.rho_t, cfg.eps));
  CHECK(j.at("mean_Q_a").get<double>() == doctest::Approx(a.summary.mean_q_a));
  CHECK(j.at("cdf").size() == 101);
  CHECK(j.at("cdf").back()[1].get<double>() == 1.0);

  // Single-sample sweep summarises that sample.
  const auto one = bna_sweep(std::span(samples.data(), 1), m.enc, m.dec, c, cfg);
  CHECK(one.summary.mean_q_a == static_cast<double>(one.rows[0].result.q_a));
  CHECK(one.summary.mean_rho_a == one.rows[0].result.rho_a);

  BnaSweepConfig missing = cfg;
  missing.bounds.erase(6);
  CHECK_THROWS_AS(bna_sweep(samples, m.enc, m.dec, c, missing), csifb::ConfigError);
}

TEST_CASE("empirical cdf") {
  const std::vector<double> v{0.1, 0.5, 0.5, 0.9};
  CHECK(empirical_cdf(v, 0.0) == 0.0);
  CHECK(empirical_cdf(v, 0.5) == 0.75);
  CHECK(empirical_cdf(v, 1.0) == 1.0);
}
