#include <cstdio>
#include <string>
#include <vector>
#include <utility>

#include "CLI11.hpp"
#include "warmrnn/warmrnn.h"

namespace {

struct RunOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::vector<uint64_t> seeds;
  std::string output;
  double scale = 0.0;
  bool quiet = false;
};

int report_error(wr_status s) {
  const std::string field = wr_last_error_field();
  std::fprintf(stderr, "error: %s\n", wr_last_error());
  if (!field.empty()) std::fprintf(stderr, "  field: %s\n", field.c_str());
  return wr_exit_code(s);
}

int run_command(const std::string& command, const RunOptions& o) {
  wr_config* cfg = nullptr;
  wr_status s = wr_config_load(o.config.c_str(), &cfg);
  if (s != WR_OK) return report_error(s);
  for (const std::string& a : o.overrides) {
    if ((s = wr_config_set(cfg, a.c_str())) != WR_OK) break;
  }
  if (s == WR_OK && !o.seeds.empty()) s = wr_config_set_seeds(cfg, o.seeds.data(), o.seeds.size());
  if (s == WR_OK && !o.output.empty()) s = wr_config_set_output(cfg, o.output.c_str());
  if (s == WR_OK && o.scale > 0.0) s = wr_config_set_scale(cfg, o.scale);
  char* summary = nullptr;
  if (s == WR_OK) s = wr_run(cfg, command.c_str(), &summary);
  wr_config_free(cfg);
  if (s != WR_OK) return report_error(s);
  if (!o.quiet) std::printf("%s\n", summary);
  wr_string_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warmup initialisation for recurrent networks"};
  app.set_version_flag("--version", std::string(wr_version()));
  app.require_subcommand(1);

  RunOptions opts;
  std::string command;
  const std::pair<const char*, const char*> commands[] = {
      {"warmup", "warm the network and measure VAA before and after"},
      {"train", "train on a supervised task (copy, denoise, pmnist, plmnist)"},
      {"rl", "train a DRQN agent on the T-Maze"},
      {"vaa-probe", "estimate per-layer VAA on a dataset"},
      {"gradcheck", "compare analytic gradients with finite differences"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", opts.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", opts.overrides, "override a config value, key.path=value (repeatable)");
    sub->add_option("--seeds", opts.seeds, "seed list, replaces config seeds");
    sub->add_option("--out", opts.output, "output directory");
    sub->add_option("--scale", opts.scale, "multiply sample counts, widths, epochs and episodes")
        ->check(CLI::PositiveNumber);
    sub->add_flag("-q,--quiet", opts.quiet, "do not print the summary");
    sub->callback([&command, name] { command = name; });
  }

  std::string summary_path;
  CLI::App* rep = app.add_subcommand("report", "print a summary.json as a table");
  rep->add_option("summary", summary_path, "summary.json of a finished run")->required();
  rep->callback([&command] { command = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (command == "report") {
    char* text = nullptr;
    const wr_status s = wr_report(summary_path.c_str(), &text);
    if (s != WR_OK) return report_error(s);
    std::fputs(text, stdout);
    wr_string_free(text);
    return 0;
  }
  return run_command(command, opts);
}
