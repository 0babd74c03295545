#pragma once

#include "ddopg/agents.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ddopg {

// Flat key=value configuration with dotted namespaces, e.g.
// agent.ddopg.temperature=0.1. Files hold one pair per line; '#' starts a
// comment. Later assignments win, which is how CLI overrides layer on top
// of file values. Keys iterate in sorted order so serialized manifests are
// stable.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void set_line(const std::string& line);  // "key=value", whitespace trimmed

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& items() const { return items_; }
  std::string serialize() const;  // sorted key=value lines

 private:
  std::map<std::string, std::string> items_;
};

// Builders resolve agent configs from a KvConfig (missing keys keep the
// defaults); describe() writes every resolved field back so manifests record
// the full effective configuration.
DdopgConfig ddopg_config_from(const KvConfig& kv);
ReinforceConfig reinforce_config_from(const KvConfig& kv);
void describe(const DdopgConfig& cfg, const std::string& prefix, KvConfig* out);
void describe(const ReinforceConfig& cfg, const std::string& prefix, KvConfig* out);

// Curve persistence. Fixed schema "iteration,steps,return,seconds", one row
// per collection event, '\n' line endings, full-precision floats, no
// locale-dependent formatting.
void write_curve_csv(const std::string& path, const LearningCurve& curve);
LearningCurve read_curve_csv(const std::string& path);

// First cumulative step count at which the rolling mean over `window` rows
// reaches `threshold`; -1 if the curve never does.
long steps_to_reach(const LearningCurve& curve, double threshold, int window);

// Trapezoidal area under return-vs-steps, restricted to steps <= max_steps
// (the final segment is cut at max_steps by linear interpolation).
double curve_auc(const LearningCurve& curve, long max_steps);

struct ExperimentConfig {
  std::string env_name = "cartpole";
  std::vector<std::string> agents{"ddopg", "reinforce"};
  std::vector<unsigned long> seeds{404, 931, 159, 380, 858, 708, 16, 448, 136, 989};
  std::string out_dir = "out";
  KvConfig overrides;
  int workers = 0;  // 0: one per hardware thread
};

// Runs every (agent, seed) pair, writing <out>/<agent>_seed<seed>.csv, a
// manifest.txt with the fully resolved configuration, and summary.csv with
// per-agent mean/std return on a common step grid (linear interpolation,
// clamped at curve ends).
void run_benchmark(const ExperimentConfig& cfg);

// Hyperparameter sweeps on the experiment's environment, first three seeds:
// history (support 5/20/50), lengthscale (log-variance 1/2/3/4),
// temperature (0.01/0.1/0.5/2.0), inner-steps (one-step at support 5 and 50
// plus the full loop). Unknown names fail.
void run_ablation(const std::string& which, const ExperimentConfig& cfg);

// Fast standalone checks of the core numerics (analytic gradients vs finite
// differences, estimator limits, replay statistics, env transitions).
// Prints one line per check; returns the number of failures.
int run_selftest();

}  // namespace ddopg
