#include "ddopg/harness.hpp"

#include "ddopg/estimators.hpp"
#include "ddopg/numkit.hpp"
#include "ddopg/replay.hpp"
#include "ddopg/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace ddopg {
namespace {

constexpr const char* kVersion = "ddopg 0.1.0";

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// The writers rely on the C locale's decimal point; nothing in this library
// calls setlocale, so this only trips if an embedding application does.
void check_numeric_locale() {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f", 0.5);
  detail::require(std::strcmp(buf, "0.5") == 0, "numeric formatting is not locale-clean");
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), "cannot open config file: " + path);
  KvConfig kv;
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    kv.set_line(line);
  }
  return kv;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  detail::require(!key.empty(), "empty config key");
  items_[key] = value;
}

void KvConfig::set_line(const std::string& line) {
  const size_t eq = line.find('=');
  detail::require(eq != std::string::npos, "config line without '=': " + line);
  set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

bool KvConfig::has(const std::string& key) const { return items_.count(key) > 0; }

std::optional<std::string> KvConfig::get(const std::string& key) const {
  auto it = items_.find(key);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  char* end = nullptr;
  const double x = std::strtod(v->c_str(), &end);
  detail::require(end == v->c_str() + v->size() && !v->empty(),
                  "config key " + key + ": not a number: " + *v);
  return x;
}

long KvConfig::get_long(const std::string& key, long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  char* end = nullptr;
  const long x = std::strtol(v->c_str(), &end, 10);
  detail::require(end == v->c_str() + v->size() && !v->empty(),
                  "config key " + key + ": not an integer: " + *v);
  return x;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
  return static_cast<int>(get_long(key, fallback));
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  detail::fail("config key " + key + ": not a boolean: " + *v);
}

std::string KvConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : items_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

namespace {

std::vector<int> parse_hidden(const std::string& text) {
  std::vector<int> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    char* end = nullptr;
    const long d = std::strtol(part.c_str(), &end, 10);
    detail::require(end == part.c_str() + part.size() && d > 0,
                    "bad hidden layer width: " + part);
    dims.push_back(static_cast<int>(d));
  }
  return dims;
}

std::string join_hidden(const std::vector<int>& dims) {
  std::string out;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

void apply_run_keys(const KvConfig& kv, long* max_env_steps, long* max_iterations,
                    std::optional<double>* target_return, int* target_window,
                    bool* record_timing) {
  *max_env_steps = kv.get_long("run.max_env_steps", *max_env_steps);
  *max_iterations = kv.get_long("run.max_iterations", *max_iterations);
  if (kv.has("run.target_return"))
    *target_return = kv.get_double("run.target_return", 0.0);
  *target_window = kv.get_int("run.target_window", *target_window);
  *record_timing = kv.get_bool("run.timing", *record_timing);
}

}  // namespace

DdopgConfig ddopg_config_from(const KvConfig& kv) {
  DdopgConfig c;
  if (auto h = kv.get("agent.ddopg.hidden")) c.hidden = parse_hidden(*h);
  c.discount = kv.get_double("agent.ddopg.discount", c.discount);
  c.temperature = kv.get_double("agent.ddopg.temperature", c.temperature);
  c.support_size = kv.get_int("agent.ddopg.support_size", c.support_size);
  c.log_lengthscale = kv.get_double("agent.ddopg.log_lengthscale", c.log_lengthscale);
  c.penalty_factor = kv.get_double("agent.ddopg.penalty_factor", c.penalty_factor);
  if (auto n = kv.get("agent.ddopg.normalization")) {
    if (*n == "self")
      c.normalization = WeightNormalization::SelfNormalized;
    else if (*n == "percount")
      c.normalization = WeightNormalization::PerCount;
    else
      detail::fail("agent.ddopg.normalization: expected self|percount, got " + *n);
  }
  c.inner.max_steps = kv.get_int("agent.ddopg.inner_steps", c.inner.max_steps);
  c.inner.adam.lr = kv.get_double("agent.ddopg.inner_lr", c.inner.adam.lr);
  c.inner.adam.beta1 = kv.get_double("agent.ddopg.inner_beta1", c.inner.adam.beta1);
  c.inner.adam.beta2 = kv.get_double("agent.ddopg.inner_beta2", c.inner.adam.beta2);
  c.inner.adam.eps = kv.get_double("agent.ddopg.inner_eps", c.inner.adam.eps);
  c.inner.grad_tol = kv.get_double("agent.ddopg.grad_tol", c.inner.grad_tol);
  c.inner.improve_tol = kv.get_double("agent.ddopg.improve_tol", c.inner.improve_tol);
  c.inner.improve_window = kv.get_int("agent.ddopg.improve_window", c.inner.improve_window);
  c.warmup_iterations = kv.get_int("agent.ddopg.warmup_iterations", c.warmup_iterations);
  c.warmup_inner_steps = kv.get_int("agent.ddopg.warmup_inner_steps", c.warmup_inner_steps);
  c.stationarity_jitter =
      kv.get_double("agent.ddopg.stationarity_jitter", c.stationarity_jitter);
  apply_run_keys(kv, &c.max_env_steps, &c.max_iterations, &c.target_return,
                 &c.target_window, &c.record_timing);
  return c;
}

ReinforceConfig reinforce_config_from(const KvConfig& kv) {
  ReinforceConfig c;
  if (auto h = kv.get("agent.reinforce.hidden")) c.hidden = parse_hidden(*h);
  c.discount = kv.get_double("agent.reinforce.discount", c.discount);
  c.step_size = kv.get_double("agent.reinforce.step_size", c.step_size);
  c.batch_env_steps = kv.get_long("agent.reinforce.batch_env_steps", c.batch_env_steps);
  c.exploration_log_variance = kv.get_double("agent.reinforce.exploration_log_variance",
                                             c.exploration_log_variance);
  c.reward_to_go = kv.get_bool("agent.reinforce.reward_to_go", c.reward_to_go);
  c.linear_baseline = kv.get_bool("agent.reinforce.linear_baseline", c.linear_baseline);
  long max_updates = c.max_updates;
  apply_run_keys(kv, &c.max_env_steps, &max_updates, &c.target_return, &c.target_window,
                 &c.record_timing);
  c.max_updates = max_updates;
  return c;
}

void describe(const DdopgConfig& c, const std::string& prefix, KvConfig* out) {
  out->set(prefix + "hidden", join_hidden(c.hidden));
  out->set(prefix + "discount", fmt_g(c.discount));
  out->set(prefix + "temperature", fmt_g(c.temperature));
  out->set(prefix + "support_size", std::to_string(c.support_size));
  out->set(prefix + "log_lengthscale", fmt_g(c.log_lengthscale));
  out->set(prefix + "penalty_factor", fmt_g(c.penalty_factor));
  out->set(prefix + "normalization",
           c.normalization == WeightNormalization::SelfNormalized ? "self" : "percount");
  out->set(prefix + "inner_steps", std::to_string(c.inner.max_steps));
  out->set(prefix + "inner_lr", fmt_g(c.inner.adam.lr));
  out->set(prefix + "inner_beta1", fmt_g(c.inner.adam.beta1));
  out->set(prefix + "inner_beta2", fmt_g(c.inner.adam.beta2));
  out->set(prefix + "inner_eps", fmt_g(c.inner.adam.eps));
  out->set(prefix + "grad_tol", fmt_g(c.inner.grad_tol));
  out->set(prefix + "improve_tol", fmt_g(c.inner.improve_tol));
  out->set(prefix + "improve_window", std::to_string(c.inner.improve_window));
  out->set(prefix + "warmup_iterations", std::to_string(c.warmup_iterations));
  out->set(prefix + "warmup_inner_steps", std::to_string(c.warmup_inner_steps));
  out->set(prefix + "stationarity_jitter", fmt_g(c.stationarity_jitter));
  out->set(prefix + "max_env_steps", std::to_string(c.max_env_steps));
  out->set(prefix + "max_iterations", std::to_string(c.max_iterations));
  out->set(prefix + "target_return",
           c.target_return ? fmt_g(*c.target_return) : std::string("none"));
  out->set(prefix + "target_window", std::to_string(c.target_window));
  out->set(prefix + "timing", c.record_timing ? "1" : "0");
}

void describe(const ReinforceConfig& c, const std::string& prefix, KvConfig* out) {
  out->set(prefix + "hidden", join_hidden(c.hidden));
  out->set(prefix + "discount", fmt_g(c.discount));
  out->set(prefix + "step_size", fmt_g(c.step_size));
  out->set(prefix + "batch_env_steps", std::to_string(c.batch_env_steps));
  out->set(prefix + "exploration_log_variance", fmt_g(c.exploration_log_variance));
  out->set(prefix + "reward_to_go", c.reward_to_go ? "1" : "0");
  out->set(prefix + "linear_baseline", c.linear_baseline ? "1" : "0");
  out->set(prefix + "max_env_steps", std::to_string(c.max_env_steps));
  out->set(prefix + "max_updates", std::to_string(c.max_updates));
  out->set(prefix + "target_return",
           c.target_return ? fmt_g(*c.target_return) : std::string("none"));
  out->set(prefix + "target_window", std::to_string(c.target_window));
  out->set(prefix + "timing", c.record_timing ? "1" : "0");
}

void write_curve_csv(const std::string& path, const LearningCurve& curve) {
  check_numeric_locale();
  detail::require(!curve.rows.empty(), "refusing to write an empty curve: " + path);
  std::ofstream out(path, std::ios::binary);
  detail::require(out.good(), "cannot open for writing: " + path);
  out << "iteration,steps,return,seconds\n";
  long prev_steps = -1;
  for (const CurveRow& r : curve.rows) {
    detail::require(r.steps > prev_steps, "curve steps not strictly increasing");
    prev_steps = r.steps;
    out << r.iteration << ',' << r.steps << ',' << fmt_g(r.ret) << ',' << fmt_g(r.seconds)
        << '\n';
  }
  detail::require(out.good(), "write failed: " + path);
}

LearningCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), "cannot open curve file: " + path);
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)), "empty curve file: " + path);
  detail::require(trim(line) == "iteration,steps,return,seconds",
                  "unexpected curve header in " + path + ": " + line);
  LearningCurve curve;
  long prev_steps = -1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (int i = 0; i < 4; ++i)
      detail::require(static_cast<bool>(std::getline(ss, f[i], ',')),
                      "short curve row in " + path + ": " + line);
    CurveRow r;
    char* end = nullptr;
    r.iteration = std::strtol(f[0].c_str(), &end, 10);
    r.steps = std::strtol(f[1].c_str(), &end, 10);
    r.ret = std::strtod(f[2].c_str(), &end);
    r.seconds = std::strtod(f[3].c_str(), &end);
    detail::require(r.steps > prev_steps, "curve steps not strictly increasing in " + path);
    prev_steps = r.steps;
    curve.rows.push_back(r);
  }
  detail::require(!curve.rows.empty(), "curve file has no rows: " + path);
  return curve;
}

long steps_to_reach(const LearningCurve& curve, double threshold, int window) {
  detail::require(window >= 1, "steps_to_reach: window must be >= 1");
  const auto& rows = curve.rows;
  double acc = 0.0;
  for (size_t i = 0; i < rows.size(); ++i) {
    acc += rows[i].ret;
    if (i >= static_cast<size_t>(window)) acc -= rows[i - window].ret;
    const size_t n = std::min(i + 1, static_cast<size_t>(window));
    if (n == static_cast<size_t>(window) && acc / static_cast<double>(n) >= threshold)
      return rows[i].steps;
  }
  return -1;
}

double curve_auc(const LearningCurve& curve, long max_steps) {
  const auto& rows = curve.rows;
  detail::require(!rows.empty(), "curve_auc: empty curve");
  double area = 0.0;
  for (size_t i = 1; i < rows.size(); ++i) {
    const double s0 = static_cast<double>(rows[i - 1].steps);
    const double s1 = static_cast<double>(rows[i].steps);
    const double r0 = rows[i - 1].ret;
    const double r1 = rows[i].ret;
    if (s0 >= static_cast<double>(max_steps)) break;
    if (s1 <= static_cast<double>(max_steps)) {
      area += 0.5 * (r0 + r1) * (s1 - s0);
    } else {
      const double cut = static_cast<double>(max_steps);
      const double rc = r0 + (r1 - r0) * (cut - s0) / (s1 - s0);
      area += 0.5 * (r0 + rc) * (cut - s0);
      break;
    }
  }
  return area;
}

namespace {

// Return linearly interpolated at a step count, clamped to the curve's ends.
double interp_return(const LearningCurve& curve, double step) {
  const auto& rows = curve.rows;
  if (step <= static_cast<double>(rows.front().steps)) return rows.front().ret;
  if (step >= static_cast<double>(rows.back().steps)) return rows.back().ret;
  size_t lo = 0, hi = rows.size() - 1;
  while (hi - lo > 1) {
    const size_t mid = (lo + hi) / 2;
    if (static_cast<double>(rows[mid].steps) <= step)
      lo = mid;
    else
      hi = mid;
  }
  const double s0 = static_cast<double>(rows[lo].steps);
  const double s1 = static_cast<double>(rows[hi].steps);
  const double t = (step - s0) / (s1 - s0);
  return rows[lo].ret + t * (rows[hi].ret - rows[lo].ret);
}

void run_jobs(std::vector<std::function<void()>>* jobs, int workers) {
  if (workers <= 0) {
    const unsigned hc = std::thread::hardware_concurrency();
    workers = hc == 0 ? 1 : static_cast<int>(hc);
  }
  workers = std::min<int>(workers, static_cast<int>(jobs->size()));
  if (workers <= 1) {
    for (auto& job : *jobs) job();
    return;
  }
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mutex;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs->size() || failed.load()) return;
      try {
        (*jobs)[i]();
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load()) detail::fail("worker failed: " + first_error);
}

LearningCurve run_one(const std::string& env_name, const std::string& agent,
                      const KvConfig& kv, unsigned long seed) {
  const std::unique_ptr<Env> env = make_env(env_name);
  if (agent == "ddopg") return ddopg_run(*env, ddopg_config_from(kv), seed).curve;
  if (agent == "reinforce") return reinforce_run(*env, reinforce_config_from(kv), seed).curve;
  detail::fail("unknown agent: " + agent);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  detail::require(out.good(), "cannot open for writing: " + path);
  out << content;
  detail::require(out.good(), "write failed: " + path);
}

std::string format_seed_list(const std::vector<unsigned long>& seeds) {
  std::string s;
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(seeds[i]);
  }
  return s;
}

}  // namespace

void run_benchmark(const ExperimentConfig& cfg) {
  detail::require(!cfg.seeds.empty(), "benchmark needs at least one seed");
  detail::require(!cfg.agents.empty(), "benchmark needs at least one agent");
  std::filesystem::create_directories(cfg.out_dir);

  struct Job {
    std::string agent;
    unsigned long seed;
    std::string path;
  };
  std::vector<Job> plan;
  for (const std::string& agent : cfg.agents)
    for (unsigned long seed : cfg.seeds)
      plan.push_back(Job{agent, seed,
                         cfg.out_dir + "/" + agent + "_seed" + std::to_string(seed) + ".csv"});

  std::vector<LearningCurve> curves(plan.size());
  std::vector<std::function<void()>> jobs;
  for (size_t i = 0; i < plan.size(); ++i)
    jobs.push_back([&, i] {
      curves[i] = run_one(cfg.env_name, plan[i].agent, cfg.overrides, plan[i].seed);
      write_curve_csv(plan[i].path, curves[i]);
    });
  run_jobs(&jobs, cfg.workers);

  KvConfig manifest = cfg.overrides;
  manifest.set("meta.version", kVersion);
  manifest.set("meta.env", cfg.env_name);
  std::string agent_list;
  for (size_t i = 0; i < cfg.agents.size(); ++i)
    agent_list += (i ? "," : "") + cfg.agents[i];
  manifest.set("meta.agents", agent_list);
  manifest.set("meta.seeds", format_seed_list(cfg.seeds));
  for (const std::string& agent : cfg.agents) {
    if (agent == "ddopg")
      describe(ddopg_config_from(cfg.overrides), "agent.ddopg.", &manifest);
    else if (agent == "reinforce")
      describe(reinforce_config_from(cfg.overrides), "agent.reinforce.", &manifest);
  }
  write_text(cfg.out_dir + "/manifest.txt", manifest.serialize());

  // Per-agent mean/std of the seed curves on one shared step grid. The grid
  // spans 0 to the latest step seen anywhere; curves are clamped at both
  // ends so short runs still contribute their final value.
  long max_step = 0;
  for (const LearningCurve& c : curves) max_step = std::max(max_step, c.rows.back().steps);
  constexpr int kGridPoints = 201;
  std::string summary = "agent,steps,mean_return,std_return\n";
  for (const std::string& agent : cfg.agents) {
    for (int g = 0; g < kGridPoints; ++g) {
      const double step = static_cast<double>(max_step) * g / (kGridPoints - 1);
      double mean = 0.0;
      int n = 0;
      for (size_t i = 0; i < plan.size(); ++i)
        if (plan[i].agent == agent) {
          mean += interp_return(curves[i], step);
          ++n;
        }
      mean /= n;
      double var = 0.0;
      for (size_t i = 0; i < plan.size(); ++i)
        if (plan[i].agent == agent) {
          const double d = interp_return(curves[i], step) - mean;
          var += d * d;
        }
      const double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
      summary += agent + "," + fmt_g(step) + "," + fmt_g(mean) + "," + fmt_g(sd) + "\n";
    }
  }
  write_text(cfg.out_dir + "/summary.csv", summary);
}

void run_ablation(const std::string& which, const ExperimentConfig& cfg) {
  detail::require(!cfg.seeds.empty(), "ablation needs at least one seed");
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<unsigned long> seeds(cfg.seeds.begin(),
                                   cfg.seeds.begin() + std::min<size_t>(3, cfg.seeds.size()));

  struct Setting {
    std::string label;
    std::function<void(DdopgConfig*)> apply;
  };
  std::vector<Setting> grid;
  if (which == "history") {
    for (int n : {5, 20, 50})
      grid.push_back({"history" + std::to_string(n),
                      [n](DdopgConfig* c) { c->support_size = n; }});
  } else if (which == "lengthscale") {
    for (int v : {1, 2, 3, 4})
      grid.push_back({"lengthscale" + std::to_string(v),
                      [v](DdopgConfig* c) { c->log_lengthscale = v; }});
  } else if (which == "temperature") {
    for (double t : {0.01, 0.1, 0.5, 2.0}) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "%g", t);
      grid.push_back({std::string("temperature") + buf,
                      [t](DdopgConfig* c) { c->temperature = t; }});
    }
  } else if (which == "inner-steps") {
    grid.push_back({"inner1_history5", [](DdopgConfig* c) {
                      c->inner.max_steps = 1;
                      c->support_size = 5;
                    }});
    grid.push_back({"inner1_history50", [](DdopgConfig* c) {
                      c->inner.max_steps = 1;
                      c->support_size = 50;
                    }});
    grid.push_back({"innerfull_history50", [](DdopgConfig* c) { c->support_size = 50; }});
  } else {
    detail::fail("unknown ablation sweep: " + which +
                 " (expected history|lengthscale|temperature|inner-steps)");
  }

  struct Job {
    std::string label;
    std::function<void(DdopgConfig*)> apply;
    unsigned long seed;
  };
  std::vector<Job> plan;
  for (const Setting& s : grid)
    for (unsigned long seed : seeds) plan.push_back(Job{s.label, s.apply, seed});

  std::vector<std::function<void()>> jobs;
  for (const Job& job : plan)
    jobs.push_back([&cfg, job] {
      DdopgConfig agent_cfg = ddopg_config_from(cfg.overrides);
      job.apply(&agent_cfg);
      const std::unique_ptr<Env> env = make_env(cfg.env_name);
      const LearningCurve curve = ddopg_run(*env, agent_cfg, job.seed).curve;
      write_curve_csv(cfg.out_dir + "/" + job.label + "_seed" + std::to_string(job.seed) +
                          ".csv",
                      curve);
    });
  run_jobs(&jobs, cfg.workers);

  KvConfig manifest = cfg.overrides;
  manifest.set("meta.version", kVersion);
  manifest.set("meta.env", cfg.env_name);
  manifest.set("meta.sweep", which);
  std::string labels;
  for (size_t i = 0; i < grid.size(); ++i) labels += (i ? "," : "") + grid[i].label;
  manifest.set("meta.settings", labels);
  manifest.set("meta.seeds", format_seed_list(seeds));
  describe(ddopg_config_from(cfg.overrides), "agent.ddopg.", &manifest);
  write_text(cfg.out_dir + "/manifest.txt", manifest.serialize());
}

namespace {

bool report(const char* name, bool ok, const std::string& detail = "") {
  std::printf("[%s] %s%s%s\n", ok ? "ok" : "FAIL", name, detail.empty() ? "" : ": ",
              detail.c_str());
  return ok;
}

}  // namespace

int run_selftest() {
  int failures = 0;
  const auto check = [&](const char* name, bool ok, const std::string& detail = "") {
    if (!report(name, ok, detail)) ++failures;
  };

  {
    // Analytic trajectory log-density gradient against central differences.
    PointMassEnv env(8);
    Rng rng(7, 0);
    const MlpSpec spec{env.spec().state_dim, {6}, env.spec().action_dim};
    PolicyParams behavior = make_policy(spec, rng);
    Rng ep(7, 1);
    const Trajectory traj = collect(env, behavior, ep, 1.0);
    PolicyParams target = make_policy(spec, rng);
    const EvalNoise noise = EvalNoise::isotropic(1, 0.0);
    const RealVec g = traj_log_lik_grad(target, noise, traj);
    const RealVec fd = finite_diff_grad(
        [&](const RealVec& th) {
          PolicyParams p = target;
          p.theta = th;
          return traj_log_lik(p, noise, traj);
        },
        target.theta, 1e-5);
    const double rel =
        (g - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, fd.lpNorm<Eigen::Infinity>());
    check("trajectory log-density gradient matches finite differences", rel < 1e-4,
          fmt_g(rel));
  }

  {
    // Surrogate gradient and its invariance to a uniform return shift.
    PointMassEnv env(6);
    Rng rng(11, 0);
    const MlpSpec spec{env.spec().state_dim, {5}, env.spec().action_dim};
    std::vector<SupportItem> items;
    for (int p = 0; p < 3; ++p) {
      auto pol = std::make_shared<const PolicyParams>(make_policy(spec, rng));
      Rng ep(11, 1 + static_cast<uint64_t>(p));
      auto traj = std::make_shared<const Trajectory>(collect(env, *pol, ep, 1.0));
      items.push_back(SupportItem{traj, pol, p, p});
    }
    SurrogateConfig scfg;
    scfg.noise = EvalNoise::isotropic(1, 0.0);
    scfg.return_bound = env.max_return();
    const SupportSet support = build_support(items, scfg.noise);
    PolicyParams target = make_policy(spec, rng);
    const RealVec g = surrogate_grad(support, target, scfg);
    const RealVec fd = finite_diff_grad(
        [&](const RealVec& th) {
          PolicyParams p = target;
          p.theta = th;
          return surrogate_return(support, p, scfg).value;
        },
        target.theta, 1e-5);
    const double rel =
        (g - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, fd.lpNorm<Eigen::Infinity>());
    check("surrogate gradient matches finite differences", rel < 1e-4, fmt_g(rel));

    SupportSet shifted = support;
    shifted.returns = (shifted.returns.array() + 7.5).matrix();
    const RealVec g2 = surrogate_grad(shifted, target, scfg);
    const double drift = (g2 - g).lpNorm<Eigen::Infinity>() /
                         std::max(1.0, g.lpNorm<Eigen::Infinity>());
    check("surrogate gradient unchanged by uniform return shift", drift < 1e-10,
          fmt_g(drift));
  }

  {
    // Own-policy importance weights are exactly one in log space.
    CartpoleEnv env;
    Rng rng(3, 0);
    const MlpSpec spec{env.spec().state_dim, {8}, env.spec().action_dim};
    auto pol = std::make_shared<const PolicyParams>(make_policy(spec, rng));
    std::vector<SupportItem> items;
    for (int i = 0; i < 4; ++i) {
      Rng ep(3, 1 + static_cast<uint64_t>(i));
      auto traj = std::make_shared<const Trajectory>(collect(env, *pol, ep, 1.0));
      items.push_back(SupportItem{traj, pol, i, 0});
    }
    SurrogateConfig scfg;
    scfg.noise = EvalNoise::isotropic(1, 3.0);
    scfg.return_bound = env.max_return();
    const SupportSet support = build_support(items, scfg.noise);
    const RealVec logw = log_surrogate_weights(support, *pol);
    check("own-policy importance weights are exactly one",
          logw.lpNorm<Eigen::Infinity>() == 0.0, fmt_g(logw.lpNorm<Eigen::Infinity>()));
    const double ess = effective_sample_size(logw);
    check("own-policy effective sample size is exactly the support size",
          ess == static_cast<double>(logw.size()), fmt_g(ess));
  }

  {
    // Replay prioritization: huge temperature flattens the distribution.
    ReplayBuffer buffer(1e9, 4);
    Rng rng(5, 0);
    const MlpSpec spec{2, {}, 1};
    auto pol = std::make_shared<const PolicyParams>(make_policy(spec, rng));
    PointMassEnv env(3);
    for (int i = 0; i < 6; ++i) {
      Rng ep(5, 1 + static_cast<uint64_t>(i));
      buffer.push(collect(env, *pol, ep, 1.0), pol);
    }
    const RealVec p = buffer.selection_probs();
    const double dev = (p.array() - 1.0 / 6.0).abs().maxCoeff();
    check("near-infinite temperature gives uniform replay selection", dev < 1e-6,
          fmt_g(dev));
  }

  {
    // One hand-checked transition per environment.
    CartpoleEnv cart;
    EnvState s;
    s.x = RealVec::Zero(4);
    s.t = 0;
    RealVec a(1);
    a << 10.0;
    const StepResult r = cart.step(s, a);
    // Upright pole, push right: theta-acc = -10/(1.1*0.5*(4/3 - 0.1/1.1)).
    const double denom = 0.5 * (4.0 / 3.0 - 0.1 / 1.1);
    const double thacc = -(10.0 / 1.1) / denom;
    const double xacc = 10.0 / 1.1 - 0.05 / 1.1 * thacc;
    const bool ok = std::abs(r.next.x[1] - 0.02 * xacc) < 1e-12 &&
                    std::abs(r.next.x[3] - 0.02 * thacc) < 1e-12 && r.reward == 1.0;
    check("cartpole transition matches the closed-form Euler step", ok);

    PointMassEnv pm(4);
    EnvState q;
    q.x = RealVec::Zero(2);
    q.x[0] = 1.0;
    q.t = 0;
    RealVec u(1);
    u << -2.0;
    const StepResult pr = pm.step(q, u);
    const bool pok = pr.reward == -(1.0 + 0.01 * 4.0) && pr.next.x[1] == -0.2 &&
                     pr.next.x[0] == 1.0;
    check("point-mass transition matches the double-integrator update", pok);
  }

  std::printf("%s\n", failures == 0 ? "selftest passed" : "selftest FAILED");
  return failures;
}

}  // namespace ddopg
