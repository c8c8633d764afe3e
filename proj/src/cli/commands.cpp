#include "csifb/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "csifb/ablnet/network.hpp"
#include "csifb/ablnet/train.hpp"
#include "csifb/ablnet/weights.hpp"
#include "csifb/adaptive/bna.hpp"
#include "csifb/adaptive/fbcu.hpp"
#include "csifb/channel/dataset.hpp"
#include "csifb/errors.hpp"
#include "csifb/septrain/septrain.hpp"

namespace csifb::cli {

using channel::JointEigenvector;

std::string Context::report_header() const {
  return "# csifb " + command + " config_hash=" + cfg.hash() + " seed=" + std::to_string(seed);
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os.precision(9);
  return os;
}

void note(const Context& ctx, const std::string& s) {
  if (ctx.log) *ctx.log << s << '\n';
}

std::filesystem::path existing(const Config& cfg, const std::string& key, const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError(cfg.where(key) + ": key '" + key + "' names a missing file " + path);
  }
  return path;
}

struct Samples {
  std::vector<JointEigenvector> all;
  std::size_t k_max = 0, n_t = 0;
};

Samples load_samples(const Config& cfg, const std::string& key) {
  Samples s;
  const auto paths = cfg.list(key);
  if (paths.empty()) throw ConfigError("key '" + key + "' lists no dataset files");
  std::vector<std::filesystem::path> files;
  for (const auto& p : paths) files.push_back(existing(cfg, key, p));
  for (const auto& f : files) {
    auto ds = channel::read_dataset(f);
    if (s.k_max == 0) {
      s.k_max = ds.k_max;
      s.n_t = ds.n_t;
    } else if (ds.k_max != s.k_max || ds.n_t != s.n_t) {
      throw ConfigError("datasets listed under '" + key + "' disagree on K_max or N_T");
    }
    s.all.insert(s.all.end(), ds.samples.begin(), ds.samples.end());
  }
  return s;
}

std::vector<std::size_t> subbands_of(std::span<const JointEigenvector> v) {
  std::vector<std::size_t> ks;
  for (const auto& w : v) ks.push_back(w.k);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

ablnet::ModelConfig model_config(const Config& cfg, std::size_t k_max, std::size_t n_t) {
  ablnet::ModelConfig m;
  m.k_max = k_max;
  m.n_t = n_t;
  m.hidden1 = cfg.count("model.hidden1", m.hidden1, 1);
  m.hidden2 = cfg.count("model.hidden2", m.hidden2, 1);
  m.d = cfg.count("model.d", m.d, 1);
  m.q = static_cast<unsigned>(cfg.count("model.q", m.q, 1, 16));
  m.arch = ablnet::arch_from_string(cfg.str("model.arch", ablnet::to_string(m.arch)));
  m.validate();
  return m;
}

std::size_t parse_count(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  std::size_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ConfigError("key '" + key + "': '" + s + "' is not a count");
  return v;
}

// "K:lo-hi" or "K:a/b/c" items.
std::map<std::size_t, std::vector<std::size_t>> parse_lengths(const Config& cfg, const std::string& key) {
  std::map<std::size_t, std::vector<std::size_t>> out;
  for (const auto& item : cfg.list(key)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("key '" + key + "': expected K:lengths in '" + item + "'");
    const std::size_t k = parse_count(item.substr(0, colon), key);
    const std::string rest = item.substr(colon + 1);
    std::vector<std::size_t> lens;
    const auto dash = rest.find('-');
    if (dash != std::string::npos) {
      const std::size_t lo = parse_count(rest.substr(0, dash), key), hi = parse_count(rest.substr(dash + 1), key);
      if (lo > hi) throw ConfigError("key '" + key + "': empty range in '" + item + "'");
      for (std::size_t n = lo; n <= hi; ++n) lens.push_back(n);
    } else {
      std::istringstream in(rest);
      std::string tok;
      while (std::getline(in, tok, '/')) lens.push_back(parse_count(tok, key));
    }
    if (!out.emplace(k, lens).second) throw ConfigError("key '" + key + "': K=" + std::to_string(k) + " repeated");
  }
  return out;
}

ablnet::TrainConfig train_config(const Config& cfg, const std::string& sec, std::uint64_t seed, unsigned threads) {
  ablnet::TrainConfig t;
  t.epochs = cfg.count(sec + ".epochs", t.epochs);
  t.batch = cfg.count(sec + ".batch", t.batch, 1);
  t.lr = cfg.real(sec + ".lr", t.lr);
  if (!(t.lr > 0.0)) throw ConfigError("key '" + sec + ".lr' must be positive");
  t.quantizer = ablnet::quantizer_mode_from_string(cfg.str(sec + ".quantizer", ablnet::to_string(t.quantizer)));
  t.lr_patience = cfg.count(sec + ".lr_patience", t.lr_patience, 1);
  t.lr_floor = cfg.real(sec + ".lr_floor", t.lr_floor);
  t.seed = seed;
  t.eval_threads = threads;
  return t;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

}  // namespace

void cmd_gen_data(Context& ctx) {
  const Config& cfg = ctx.cfg;
  channel::ChannelConfig base;
  base.n_t = cfg.count("channel.n_t", 8, 1);
  base.n_r = cfg.count("channel.n_r", 2, 1);
  base.n_sc = cfg.count("channel.n_sc", base.n_sc, 1);
  const auto ks = cfg.counts("channel.subbands", {3, 6});
  if (ks.empty()) throw ConfigError("key 'channel.subbands' is empty");
  const std::size_t k_max = cfg.count("channel.k_max", *std::max_element(ks.begin(), ks.end()), 1);
  const auto profiles = cfg.list("channel.profiles", {"A"});
  const bool paths_set = cfg.has("channel.paths");
  const std::size_t paths = cfg.count("channel.paths", 0, 1);
  const std::size_t n_train = cfg.count("data.train", 4096);
  const std::size_t n_test = cfg.count("data.test", 512);
  for (std::size_t k : ks) {
    if (k < 1 || k > k_max) throw ConfigError("subband count " + std::to_string(k) + " outside [1, K_max]");
  }
  cfg.reject_unused();

  auto manifest = open_out(ctx.out / "manifest.csv");
  manifest << ctx.report_header() << '\n' << "file,profile,K,split,count,near_degenerate\n";
  for (const auto& pname : profiles) {
    const auto profile = channel::profile_from_string(pname);
    for (std::size_t k : ks) {
      channel::ChannelConfig cc = base;
      cc.k = k;
      cc.seed = mix(ctx.seed ^ mix(static_cast<std::uint64_t>(profile) * 1000 + k));
      cc = channel::with_profile(cc, profile);
      if (paths_set) cc.paths = paths;
      cc.validate();
      for (auto split : {channel::Split::train, channel::Split::test}) {
        const bool tr = split == channel::Split::train;
        const auto ds = channel::generate_dataset(cc, k_max, tr ? n_train : n_test, tr ? 0 : n_train, split,
                                                  ctx.threads);
        const std::string name = pname + "_K" + std::to_string(k) + (tr ? "_train" : "_test") + ".csie";
        channel::write_dataset(ds, ctx.out / name);
        manifest << name << ',' << pname << ',' << k << ',' << (tr ? "train" : "test") << ',' << ds.size() << ','
                 << ds.near_degenerate.size() << '\n';
        note(ctx, "wrote " + (ctx.out / name).string());
      }
    }
  }
}

void cmd_train(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Samples train = load_samples(cfg, "data.train");
  Samples test;
  if (cfg.has("data.test")) {
    test = load_samples(cfg, "data.test");
    if (test.k_max != train.k_max || test.n_t != train.n_t) {
      throw ConfigError("test data disagrees with training data on K_max or N_T");
    }
  }
  const auto mc = model_config(cfg, train.k_max, train.n_t);
  auto tc = train_config(cfg, "train", ctx.seed, ctx.threads);
  if (cfg.has("train.fbcu")) {
    if (cfg.str("train.fbcu") == "default") {
      for (std::size_t k : subbands_of(train.all)) tc.fbcu_lengths[k] = adaptive::default_length_set(k, mc.d).lengths;
    } else {
      tc.fbcu_lengths = parse_lengths(cfg, "train.fbcu");
    }
  }
  const std::string draw = cfg.str("train.fbcu_draw", "batch");
  if (draw != "epoch" && draw != "batch") throw ConfigError("key 'train.fbcu_draw': expected epoch or batch");
  tc.fbcu_per_batch = draw == "batch";
  for (const auto& [k, lens] : tc.fbcu_lengths) adaptive::make_length_set(k, lens, mc.d);
  cfg.reject_unused();

  auto model = ablnet::Model<float>::init(mc, mix(ctx.seed));
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> seconds;
  tc.on_epoch = [&](const ablnet::EpochRecord& r) {
    seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    note(ctx, "epoch " + std::to_string(r.epoch) + " loss " + fmt(r.train_loss) + " test " + fmt(r.mean_test_sgcs));
  };
  const auto h = ablnet::train(model, train.all, test.all, tc);
  ablnet::save_model(ctx.out / "model.ablw", model);

  // Epoch 0 is the untrained model.
  const auto ks = subbands_of(test.all);
  auto hist = open_out(ctx.out / "history.csv");
  hist << ctx.report_header() << '\n' << "epoch,train_loss,lr,mean_test_sgcs";
  for (std::size_t k : ks) hist << ",sgcs_K" << k;
  if (!ctx.reproducible) hist << ",seconds";
  hist << '\n';
  auto row = [&](std::size_t epoch, const std::string& loss, const std::string& lr, double mean,
                 const std::map<std::size_t, double>& by_k, double secs) {
    hist << epoch << ',' << loss << ',' << lr << ',' << fmt(mean);
    for (std::size_t k : ks) hist << ',' << fmt(by_k.count(k) ? by_k.at(k) : 0.0);
    if (!ctx.reproducible) hist << ',' << fmt(secs);
    hist << '\n';
  };
  row(0, "", "", h.initial_mean_test_sgcs, h.initial_test_sgcs, 0.0);
  for (std::size_t i = 0; i < h.epochs.size(); ++i) {
    const auto& r = h.epochs[i];
    row(r.epoch, fmt(r.train_loss), fmt(r.lr), r.mean_test_sgcs, r.test_sgcs, seconds[i]);
  }
}

void cmd_eval(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const auto model_path = existing(cfg, "eval.model", cfg.str("eval.model"));
  const Samples data = load_samples(cfg, "eval.data");
  const auto ks = cfg.counts("eval.subbands", subbands_of(data.all));
  const auto q_items = cfg.list("eval.q_grid", {"full"});
  cfg.reject_unused();
  const auto model = ablnet::load_model(model_path);
  const auto& mc = model.config;
  if (data.n_t != mc.n_t || data.k_max > mc.k_max) throw ConfigError("evaluation data does not fit the model");

  std::vector<std::size_t> q_grid;  // 0 = full
  for (const auto& s : q_items) q_grid.push_back(s == "full" ? 0 : parse_count(s, "eval.q_grid"));
  const auto groups = ablnet::group_by_k(data.all);
  for (std::size_t k : ks) {
    if (!groups.count(k)) throw ConfigError("no evaluation samples with K=" + std::to_string(k));
    for (std::size_t q : q_grid) {
      if (q != 0 && (q % mc.q != 0 || q < mc.q || q > mc.feedback_bits(k))) {
        throw ConfigError("Q=" + std::to_string(q) + " is not a feedback size for K=" + std::to_string(k));
      }
    }
  }

  auto os = open_out(ctx.out / "eval.csv");
  os << ctx.report_header() << '\n' << "K,Q,n,samples,mean_sgcs\n";
  for (std::size_t k : ks) {
    std::vector<JointEigenvector> subset;
    for (std::size_t i : groups.at(k)) subset.push_back(data.all[i]);
    for (std::size_t q : q_grid) {
      ablnet::EvalOptions o;
      o.threads = ctx.threads;
      o.n = q == 0 ? 0 : q / mc.q;
      const double s = ablnet::mean(ablnet::evaluate_sgcs(model, subset, o));
      const std::size_t bits = q == 0 ? mc.feedback_bits(k) : q;
      os << k << ',' << bits << ',' << bits / mc.q << ',' << subset.size() << ',' << fmt(s) << '\n';
    }
  }
}

void cmd_bna(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const auto model_path = existing(cfg, "bna.model", cfg.str("bna.model"));
  const Samples data = load_samples(cfg, "bna.data");
  const std::string rho_spec = cfg.str("bna.rho_t");
  adaptive::BnaSweepConfig sc;
  sc.eps = cfg.real("bna.eps", 0.01);
  sc.threads = ctx.threads;
  std::map<std::size_t, std::vector<std::size_t>> explicit_sets;
  std::map<std::size_t, std::size_t> explicit_qi;
  if (cfg.has("bna.bounds")) {
    // K:lo-hi@Q_i with lo/hi/Q_i in bits
    for (const auto& item : cfg.list("bna.bounds")) {
      const auto colon = item.find(':'), dash = item.find('-'), at = item.find('@');
      if (colon == std::string::npos || dash == std::string::npos || at == std::string::npos || !(colon < dash && dash < at)) {
        throw ConfigError("key 'bna.bounds': expected K:Qmin-Qmax@Qi in '" + item + "'");
      }
      const std::size_t k = parse_count(item.substr(0, colon), "bna.bounds");
      sc.bounds[k] = {parse_count(item.substr(colon + 1, dash - colon - 1), "bna.bounds"),
                      parse_count(item.substr(dash + 1, at - dash - 1), "bna.bounds"),
                      parse_count(item.substr(at + 1), "bna.bounds")};
    }
  }
  cfg.reject_unused();
  const auto model = ablnet::load_model(model_path);
  const auto& mc = model.config;
  if (data.n_t != mc.n_t || data.k_max > mc.k_max) throw ConfigError("BNA data does not fit the model");
  for (std::size_t k : subbands_of(data.all)) {
    if (sc.bounds.count(k)) continue;
    const auto set = adaptive::default_length_set(k, mc.d);
    sc.bounds[k] = {set.min() * mc.q, set.max() * mc.q, (set.min() + set.max()) / 2 * mc.q};
  }

  ablnet::EvalOptions full;
  full.threads = ctx.threads;
  if (rho_spec == "median") {
    auto s = ablnet::evaluate_sgcs(model, data.all, full);
    std::sort(s.begin(), s.end());
    sc.rho_t = s.size() % 2 ? s[s.size() / 2] : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]);
  } else {
    sc.rho_t = cfg.real("bna.rho_t");
  }
  const auto sweep = adaptive::bna_sweep(data.all, model.enc, model.dec, mc, sc);

  auto csv = open_out(ctx.out / "bna.csv");
  csv << ctx.report_header() << '\n';
  adaptive::write_sweep_csv(csv, sweep.rows);
  auto js = open_out(ctx.out / "bna_summary.json");
  std::string body = adaptive::summary_json(sweep.summary, sc.rho_t, sc.eps);
  // Header fields go first so every report starts with the config hash and seed.
  js << "{\n  \"config_hash\": \"" << cfg.hash() << "\",\n  \"seed\": " << ctx.seed << ",\n" << body.substr(2);
  note(ctx, "rho_t " + fmt(sc.rho_t) + " mean Q_a " + fmt(sweep.summary.mean_q_a));
}

void cmd_septrain(Context& ctx) {
  const Config& cfg = ctx.cfg;
  septrain::SeptrainConfig sc;
  const std::size_t n_t = cfg.count("model.n_t", 8, 1);
  const auto ks = cfg.counts("septrain.subbands", {6});
  if (ks.empty()) throw ConfigError("key 'septrain.subbands' is empty");
  const std::size_t k_max = cfg.count("model.k_max", *std::max_element(ks.begin(), ks.end()), 1);
  sc.model = model_config(cfg, k_max, n_t);
  sc.subbands = ks;
  sc.train_per_k = cfg.count("septrain.train_per_k", 1024, 1);
  sc.test_per_k = cfg.count("septrain.test_per_k", 256, 1);
  sc.n_r = cfg.count("septrain.n_r", 2, 1);
  const auto ue_items =
      cfg.list("septrain.ues", {"1:bilstm-base:C", "2:bilstm-wide:A", "3:gru-base:A"});
  for (const auto& item : ue_items) {
    const auto a = item.find(':'), b = item.rfind(':');
    if (a == std::string::npos || a == b) throw ConfigError("key 'septrain.ues': expected id:arch:profile in '" + item + "'");
    const std::size_t id = parse_count(item.substr(0, a), "septrain.ues");
    if (id > 0xffff) throw ConfigError("key 'septrain.ues': UE id exceeds u16");
    sc.ues.push_back({static_cast<std::uint16_t>(id), ablnet::arch_from_string(item.substr(a + 1, b - a - 1)),
                      channel::profile_from_string(item.substr(b + 1))});
  }
  sc.ue_train = train_config(cfg, "ue_train", 0, ctx.threads);
  sc.decoder_train = train_config(cfg, "decoder_train", 0, ctx.threads);
  sc.pretrain = train_config(cfg, "pretrain", 0, ctx.threads);
  sc.finetune = train_config(cfg, "finetune", 0, ctx.threads);
  sc.seed = ctx.seed;
  sc.threads = ctx.threads;
  sc.pair_dir = ctx.out / "pairs";
  cfg.reject_unused();

  const auto rep = septrain::run_septrain(sc);
  auto csv = open_out(ctx.out / "septrain.csv");
  csv << ctx.report_header() << '\n';
  septrain::write_septrain_csv(csv, rep);
  note(ctx, "UE-first mean " + fmt(rep.mean_ue_first) + ", gNB-first mean " + fmt(rep.mean_gnb_first));
}

}  // namespace csifb::cli
