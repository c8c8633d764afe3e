#include "csifb/adaptive/bna.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <string>

#include "csifb/ablnet/network.hpp"
#include "csifb/adaptive/fbcu.hpp"
#include "csifb/errors.hpp"
#include "csifb/parallel.hpp"
#include "json.hpp"

namespace csifb::adaptive {

void BnaConfig::validate() const {
  if (!(rho_t > 0.0 && rho_t <= 1.0)) throw ConfigError("rho_t must lie in (0, 1]");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (q < 1 || q > 16) throw ConfigError("q must lie in [1, 16]");
  if (q_min < q || q_min > q_max) throw ConfigError("need q <= Q_min <= Q_max");
  if (q_min % q != 0 || q_max % q != 0) throw ConfigError("Q_min and Q_max must be multiples of q");
}

std::string to_string(Clamp c) {
  switch (c) {
    case Clamp::none: return "none";
    case Clamp::min: return "min";
    case Clamp::max: return "max";
  }
  return "none";
}

std::size_t bna_eval_bound(const BnaConfig& cfg) {
  const std::size_t size = (cfg.q_max - cfg.q_min) / cfg.q + 1;
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < size) ++bits;
  return bits + 1;
}

BnaResult bna_adjust(const BnaEval& eval, std::size_t q_i, double rho_i, const BnaConfig& cfg) {
  cfg.validate();
  if (q_i < cfg.q_min || q_i > cfg.q_max || q_i % cfg.q != 0) {
    throw RangeError("Q_i=" + std::to_string(q_i) + " is not an admissible bit count in [" +
                     std::to_string(cfg.q_min) + ", " + std::to_string(cfg.q_max) + "]");
  }
  const auto in_band = [&](double rho) { return std::abs(rho - cfg.rho_t) <= cfg.eps; };
  BnaResult res;
  if (in_band(rho_i)) {
    res.q_a = q_i;
    res.rho_a = rho_i;
    res.hit_band = true;
    return res;
  }

  const std::size_t n_i = q_i / cfg.q, n_min = cfg.q_min / cfg.q, n_max = cfg.q_max / cfg.q;
  std::map<std::size_t, double> memo{{n_i, rho_i}};
  const auto rho_at = [&](std::size_t n) {
    auto it = memo.find(n);
    if (it == memo.end()) {
      it = memo.emplace(n, eval(n * cfg.q)).first;
      ++res.evals;
    }
    return it->second;
  };

  const bool too_high = rho_i - cfg.rho_t > cfg.eps;
  std::size_t lo = too_high ? n_min : n_i, hi = too_high ? n_i : n_max;
  std::size_t mid = n_i;
  double rho_mid = rho_i;
  while (lo <= hi) {
    mid = (lo + hi) / 2;
    rho_mid = rho_at(mid);
    res.trace.push_back(mid);
    if (in_band(rho_mid)) {
      res.hit_band = true;
      break;
    }
    if (rho_mid - cfg.rho_t < -cfg.eps) {
      lo = mid + 1;
    } else {
      if (mid == 0) break;
      hi = mid - 1;
    }
  }
  res.q_a = mid * cfg.q;
  res.rho_a = rho_mid;
  if (!res.hit_band) {
    if (res.q_a == cfg.q_max && rho_mid < cfg.rho_t) res.clamped = Clamp::max;
    if (res.q_a == cfg.q_min && rho_mid > cfg.rho_t) res.clamped = Clamp::min;
  }
  return res;
}

double empirical_cdf(std::span<const double> values, double x) {
  if (values.empty()) return 0.0;
  std::size_t below = 0;
  for (double v : values) below += v <= x ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(values.size());
}

BnaSummary summarize(std::span<const BnaSweepRow> rows) {
  BnaSummary s;
  s.count = rows.size();
  std::vector<double> rho_i, rho_a;
  for (const auto& r : rows) {
    s.mean_q_i += static_cast<double>(r.q_i);
    s.mean_rho_i += r.rho_i;
    s.mean_q_a += static_cast<double>(r.result.q_a);
    s.mean_rho_a += r.result.rho_a;
    s.hits += r.result.hit_band ? 1 : 0;
    s.clamped_min += r.result.clamped == Clamp::min ? 1 : 0;
    s.clamped_max += r.result.clamped == Clamp::max ? 1 : 0;
    rho_i.push_back(r.rho_i);
    rho_a.push_back(r.result.rho_a);
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    s.mean_q_i /= n;
    s.mean_rho_i /= n;
    s.mean_q_a /= n;
    s.mean_rho_a /= n;
  }
  for (int i = 0; i <= 100; ++i) {
    const double x = i / 100.0;
    s.cdf_initial.emplace_back(x, empirical_cdf(rho_i, x));
    s.cdf_adjusted.emplace_back(x, empirical_cdf(rho_a, x));
  }
  return s;
}

BnaSweep bna_sweep(std::span<const channel::JointEigenvector> samples, const ablnet::EncoderParams<float>& enc,
                   const ablnet::DecoderParams<float>& dec, const ablnet::ModelConfig& model,
                   const BnaSweepConfig& cfg) {
  std::map<std::size_t, BnaConfig> per_k;
  for (const auto& [k, b] : cfg.bounds) {
    BnaConfig c{cfg.rho_t, cfg.eps, b.q_min, b.q_max, model.q};
    c.validate();
    if (b.q_max > model.feedback_bits(k)) {
      throw ConfigError("Q_max=" + std::to_string(b.q_max) + " exceeds the full feedback of K=" + std::to_string(k));
    }
    if (b.q_i < b.q_min || b.q_i > b.q_max || b.q_i % model.q != 0) {
      throw ConfigError("Q_i=" + std::to_string(b.q_i) + " outside the bounds for K=" + std::to_string(k));
    }
    per_k.emplace(k, c);
  }
  for (const auto& w : samples) {
    if (!per_k.count(w.k)) throw ConfigError("no BNA bounds for K=" + std::to_string(w.k));
  }

  BnaSweep out;
  out.rows.resize(samples.size());
  parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
    const auto& w = samples[i];
    const BnaConfig& c = per_k.at(w.k);
    const ablnet::Codeword code = ablnet::encode(w, enc, model);
    const auto eval = [&](std::size_t bits) { return feedback_roundtrip(w, code, bits / c.q, dec, model).rho; };
    BnaSweepRow& row = out.rows[i];
    row.sample_id = i;
    row.k = w.k;
    row.q_i = cfg.bounds.at(w.k).q_i;
    row.rho_i = eval(row.q_i);
    row.result = bna_adjust(eval, row.q_i, row.rho_i, c);
  });
  out.summary = summarize(out.rows);
  return out;
}

void write_sweep_csv(std::ostream& os, std::span<const BnaSweepRow> rows) {
  os << "sample_id,K,Q_i,rho_i,Q_a,rho_a,evals,clamped,hit_band\n";
  const auto old = os.precision(9);
  for (const auto& r : rows) {
    os << r.sample_id << ',' << r.k << ',' << r.q_i << ',' << r.rho_i << ',' << r.result.q_a << ','
       << r.result.rho_a << ',' << r.result.evals << ',' << to_string(r.result.clamped) << ','
       << (r.result.hit_band ? 1 : 0) << '\n';
  }
  os.precision(old);
}

std::string summary_json(const BnaSummary& s, double rho_t, double eps) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["rho_t"] = rho_t;
  j["eps"] = eps;
  j["mean_Q_i"] = s.mean_q_i;
  j["mean_rho_i"] = s.mean_rho_i;
  j["mean_Q_a"] = s.mean_q_a;
  j["mean_rho_a"] = s.mean_rho_a;
  j["hit_band"] = s.hits;
  j["clamped_min"] = s.clamped_min;
  j["clamped_max"] = s.clamped_max;
  auto table = [](const std::vector<std::pair<double, double>>& cdf) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& [x, f] : cdf) a.push_back({x, f});
    return a;
  };
  j["cdf"] = table(s.cdf_adjusted);
  j["cdf_initial"] = table(s.cdf_initial);
  return j.dump(2) + "\n";
}

}  // namespace csifb::adaptive
