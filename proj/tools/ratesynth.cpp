#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ratesynth/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "pipeline configuration (JSON)")->required();
  cmd->add_option("--out", f.out, "output directory, overrides output_dir");
  cmd->add_option("--seed", f.seed, "master seed, overrides every seed in the config");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

ratesynth::PipelineConfig resolve(const Flags& f) {
  auto cfg = ratesynth::load_config(f.config);
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.seed) cfg.override_seed(*f.seed);
  if (f.threads) cfg.threads = *f.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partially synthetic rating data: synthesize, benchmark, audit"};
  app.require_subcommand(1);
  Flags flags;
  auto* syn = app.add_subcommand("synthesize", "write synthetic.csv, mask.txt and synthesis_log.json");
  auto* bench = app.add_subcommand("benchmark", "write leaderboard.csv and agreement.json");
  auto* aud = app.add_subcommand("audit", "write audit.json and histogram.csv");
  auto* all = app.add_subcommand("run-all", "synthesize, benchmark and audit in sequence");
  for (auto* cmd : {syn, bench, aud, all}) add_flags(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto cfg = resolve(flags);
    if (syn->parsed()) ratesynth::cmd_synthesize(cfg, &std::cerr);
    if (bench->parsed()) ratesynth::cmd_benchmark(cfg, &std::cerr);
    if (aud->parsed()) ratesynth::cmd_audit(cfg, &std::cerr);
    if (all->parsed()) ratesynth::run_all(cfg, &std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
