#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cephalo/commands.hpp"
#include "cephalo/errors.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t threads = -1;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, GlobalArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration file (JSON)")->required();
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--threads", args.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--seed", args.seed, "Override the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Colour-from-focus ball lens simulator and analysis toolkit"};
  app.require_subcommand(1);

  GlobalArgs args;
  using Handler = void (*)(const cephalo::RunConfig&, const std::filesystem::path&);
  const std::pair<const char*, Handler> commands[] = {
      {"trace", &cephalo::cmd_trace},         {"sweep", &cephalo::cmd_sweep},
      {"events", &cephalo::cmd_events},       {"analyze", &cephalo::cmd_analyze},
      {"calibrate", &cephalo::cmd_calibrate}, {"segment", &cephalo::cmd_segment},
      {"spectrum", &cephalo::cmd_spectrum},
  };

  Handler selected = nullptr;
  for (const auto& [name, handler] : commands) {
    CLI::App* sub = app.add_subcommand(name);
    add_common(sub, args);
    Handler h = handler;
    sub->callback([&selected, h] { selected = h; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors; --help stays 0
  }

  try {
    cephalo::RunConfig config = cephalo::load_config(args.config_path);
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    if (args.threads >= 0) config.threads = static_cast<unsigned>(args.threads);
    selected(config, args.out_dir);
  } catch (const cephalo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
