#include <ostream>

#include "CLI11.hpp"
#include "csifb/cli/commands.hpp"
#include "csifb/errors.hpp"

namespace csifb::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive eigenvector CSI feedback experiments", "csifb"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool reproducible = false;
  bool quiet = false;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  auto* seed_opt = app.add_option("--seed", seed, "Global seed (overrides the config 'seed' key)");
  app.add_option("--config", config_path, "key=value config file with [sections]");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_flag("--reproducible", reproducible, "Omit timing columns so reruns are byte-identical");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", overrides, "Override a config key: section.key=value")->allow_extra_args(false);
  app.add_flag("--quiet", quiet, "No progress output");

  struct Cmd {
    const char* name;
    const char* help;
    void (*fn)(Context&);
  };
  const Cmd cmds[] = {
      {"gen-data", "Generate train/test datasets per profile and subband count", cmd_gen_data},
      {"train", "Train the autoencoder and write weights and history", cmd_train},
      {"eval", "SGCS per subband count and feedback size", cmd_eval},
      {"bna", "Per-sample bit number adjustment sweep", cmd_bna},
      {"septrain", "UE-first separate training against the gNB-first baseline", cmd_septrain},
  };
  for (const auto& c : cmds) app.add_subcommand(c.name, c.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    Context ctx;
    ctx.cfg = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + o + "'");
      ctx.cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (*seed_opt) ctx.cfg.set("seed", std::to_string(seed));
    ctx.seed = ctx.cfg.u64("seed", 0);
    ctx.threads = *threads_opt ? threads : static_cast<unsigned>(ctx.cfg.count("threads", 1, 1, 1024));
    ctx.reproducible = reproducible || ctx.cfg.boolean("reproducible", false);
    ctx.out = out_dir;
    ctx.log = quiet ? nullptr : &err;
    for (const auto& c : cmds) {
      if (app.got_subcommand(c.name)) {
        ctx.command = c.name;
        std::filesystem::create_directories(ctx.out);
        c.fn(ctx);
      }
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace csifb::cli
