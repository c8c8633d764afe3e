#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "csifb/cli/config.hpp"

namespace csifb::cli {

struct Context {
  Config cfg;
  std::string command;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool reproducible = false;
  std::filesystem::path out = "out";
  std::ostream* log = nullptr;  // progress lines; may be null

  // "# csifb <command> config_hash=<hex> seed=<n>"
  std::string report_header() const;
};

void cmd_gen_data(Context& ctx);
void cmd_train(Context& ctx);
void cmd_eval(Context& ctx);
void cmd_bna(Context& ctx);
void cmd_septrain(Context& ctx);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Full command line handling. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace csifb::cli
