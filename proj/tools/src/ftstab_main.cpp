#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ftstab/cli_run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"finite-time stabilization toolkit for mean-field stochastic plants"};
  app.require_subcommand(1);

  ftstab::CliOptions opts;

  std::uint64_t seed = 0;
  std::size_t runs = 0, depth_cap = 0;
  double gamma = 0.0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", opts.config_path, "JSON problem description");
    if (needs_config) cfg->required();
    sub->add_option("--out", opts.out_dir, "output directory (default: current)");
    sub->add_option("--seed", seed, "override mc.seed");
    sub->add_option("--runs", runs, "override mc.runs");
    sub->add_option("--gamma", gamma, "override lmi.gamma");
    sub->add_option("--depth-cap", depth_cap, "difference-form expansion depth");
  };

  const struct {
    const char* name;
    const char* blurb;
    bool needs_config;
  } commands[] = {
      {"analyze", "evaluate all boundedness criteria for the configured gains", true},
      {"synthesize", "search the gamma grid for certified gains", true},
      {"simulate", "Monte Carlo paths plus exact moment track", true},
      {"verify-gains", "exact verdict plus uncertainty falsification search", true},
      {"export-sdpa", "write the synthesis feasibility problem in SDPA sparse format", true},
      {"reproduce-example", "regenerate the bundled example's figures and verdicts", true},
      {"selftest", "run the built-in oracle suite", false},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.blurb), c.needs_config);

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  opts.command = sub->get_name();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--runs")) opts.runs = runs;
  if (sub->count("--gamma")) opts.gamma = gamma;
  if (sub->count("--depth-cap")) opts.depth_cap = depth_cap;

  return ftstab::run_cli(opts, std::cout, std::cerr);
}
