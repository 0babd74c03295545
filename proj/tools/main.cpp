#include "ddopg/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

namespace {

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= text.size()) {
    const size_t comma = text.find(',', start);
    const std::string part =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!part.empty()) out.push_back(part);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<unsigned long> parse_seeds(const std::string& text) {
  std::vector<unsigned long> seeds;
  for (const std::string& part : split_csv(text)) seeds.push_back(std::stoul(part));
  return seeds;
}

struct CommonArgs {
  std::string env = "cartpole";
  std::string seeds;
  std::string out;
  std::string config_file;
  std::vector<std::string> sets;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--env", args->env, "environment: cartpole, mountaincar, pointmass");
  cmd->add_option("--seeds", args->seeds, "comma-separated seeds (default: the 10 stock seeds)");
  cmd->add_option("--out", args->out, "output directory");
  cmd->add_option("--config", args->config_file, "key=value config file");
  cmd->add_option("--set", args->sets, "override, e.g. --set agent.ddopg.temperature=0.2");
  cmd->add_option("--jobs", args->jobs, "worker threads (default: hardware)");
}

ddopg::ExperimentConfig resolve(const CommonArgs& args, const std::string& default_out) {
  ddopg::ExperimentConfig cfg;
  cfg.env_name = args.env;
  if (!args.seeds.empty()) cfg.seeds = parse_seeds(args.seeds);
  cfg.out_dir = args.out.empty() ? default_out : args.out;
  if (!args.config_file.empty()) cfg.overrides = ddopg::KvConfig::from_file(args.config_file);
  for (const std::string& line : args.sets) cfg.overrides.set_line(line);
  cfg.workers = args.jobs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy gradient learning with deterministic rollouts"};
  app.require_subcommand(1);

  CommonArgs bench_args;
  std::string agents = "ddopg,reinforce";
  CLI::App* bench = app.add_subcommand("benchmark", "train agents across seeds, write curves");
  add_common(bench, &bench_args);
  bench->add_option("--agents", agents, "comma-separated agents: ddopg, reinforce");

  CommonArgs abl_args;
  std::string sweep;
  CLI::App* abl = app.add_subcommand("ablation", "hyperparameter sweep on one agent");
  add_common(abl, &abl_args);
  abl->add_option("--sweep", sweep, "history | lengthscale | temperature | inner-steps")
      ->required();

  CLI::App* self = app.add_subcommand("selftest", "fast numeric sanity checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) {
      ddopg::ExperimentConfig cfg = resolve(bench_args, "out/benchmark");
      cfg.agents = split_csv(agents);
      ddopg::run_benchmark(cfg);
      std::printf("wrote %s\n", cfg.out_dir.c_str());
    } else if (abl->parsed()) {
      ddopg::ExperimentConfig cfg = resolve(abl_args, "out/ablation_" + sweep);
      ddopg::run_ablation(sweep, cfg);
      std::printf("wrote %s\n", cfg.out_dir.c_str());
    } else if (self->parsed()) {
      return ddopg::run_selftest() == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
