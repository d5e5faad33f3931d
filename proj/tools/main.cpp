// ringbalance command line: run, sweep, verify-allocator, gradcheck, worker.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ringbalance/allocator.hpp"
#include "ringbalance/config_json.hpp"
#include "ringbalance/engine.hpp"
#include "ringbalance/gradcheck.hpp"
#include "ringbalance/log.hpp"
#include "ringbalance/metrics.hpp"

namespace fs = std::filesystem;
using namespace ringbalance;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;
constexpr int kUsage = 64;

// Thrown for bad flag values found after CLI11 has parsed.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) out.push_back(part);
  return out;
}

Weights parse_weights(const std::string& s) {
  Weights w;
  for (const auto& p : split(s, ',')) {
    try {
      w.push_back(std::stoll(p));
    } catch (const std::exception&) {
      throw UsageError("bad weight '" + p + "'");
    }
  }
  return w;
}

// "1,2;1,5" -> [[1ms,2ms],[1ms,5ms]]
std::vector<std::vector<Duration>> parse_costs(const std::string& s) {
  std::vector<std::vector<Duration>> out;
  for (const auto& group : split(s, ';')) {
    std::vector<Duration> costs;
    for (const auto& p : split(group, ',')) {
      double ms = 0.0;
      try {
        ms = std::stod(p);
      } catch (const std::exception&) {
        throw UsageError("bad cost '" + p + "'");
      }
      costs.push_back(Duration{std::llround(ms * 1e6)});
    }
    out.push_back(std::move(costs));
  }
  if (out.empty()) throw UsageError("--costs is empty");
  return out;
}

std::pair<int, int> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const int n = std::stoi(s);
      return {n, n};
    }
    return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw UsageError("bad range '" + s + "', expected lo..hi");
  }
}

void require_valid(const ExperimentConfig& c) {
  const auto problems = validate(c);
  if (problems.empty()) return;
  std::string msg = "invalid config:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

std::string join_weights(const Weights& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + std::to_string(w[i]);
  return s;
}

struct RunArgs {
  std::string config;
  std::string mode;
  std::string weights;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
};

void apply_overrides(ExperimentConfig& c, const RunArgs& a) {
  if (!a.mode.empty()) {
    try {
      c.mode.kind = parse_run_mode(a.mode);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  if (!a.weights.empty()) {
    if (c.mode.kind == RunModeKind::kStatic) {
      c.mode.static_weights = parse_weights(a.weights);
    } else {
      c.initial_weights = parse_weights(a.weights);
    }
  }
  if (a.epochs) c.epochs = *a.epochs;
  if (a.seed) c.seed = *a.seed;
}

int cmd_run(const RunArgs& a) {
  ExperimentConfig c = load_config(a.config);
  apply_overrides(c, a);
  require_valid(c);
  const ExperimentReport r = run_experiment(c);
  fs::create_directories(a.out);
  write_csv(r, fs::path(a.out) / "run.csv");
  write_json(r, fs::path(a.out) / "run.json");
  std::cout << "mode " << to_string(c.mode.kind) << "  epochs " << r.epochs.size() << "  final weights "
            << join_weights(r.allocation_history.back()) << "  frozen epoch "
            << (r.frozen_epoch ? std::to_string(*r.frozen_epoch) : "-") << "\n"
            << "virtual time " << r.virtual_time.count() << " ns  final loss " << r.final_loss << "\n";
  return kOk;
}

int cmd_sweep(const RunArgs& a, const std::string& costs_text) {
  ExperimentConfig base = load_config(a.config);
  apply_overrides(base, a);
  const auto sweeps = parse_costs(costs_text);
  fs::create_directories(a.out);

  std::ofstream summary(fs::path(a.out) / "summary.csv");
  if (!summary) throw std::runtime_error("cannot write " + (fs::path(a.out) / "summary.csv").string());
  summary << "case,costs_ns,mode,frozen_weights,frozen_epoch,mean_T_ns,equal_mean_T_ns,speedup,final_loss\n";

  for (std::size_t k = 0; k < sweeps.size(); ++k) {
    ExperimentConfig c = base;
    c.workers.clear();
    for (std::size_t i = 0; i < sweeps[k].size(); ++i) {
      WorkerProfile p;
      p.rank = static_cast<int>(i);
      p.per_sample_cost = sweeps[k][i];
      p.jitter_sigma = i < base.workers.size() ? base.workers[i].jitter_sigma : 0.0;
      c.workers.push_back(p);
    }
    // Weights in the base config rarely fit a different worker count.
    if (c.mode.kind == RunModeKind::kStatic && c.mode.static_weights.size() != c.workers.size()) {
      throw UsageError("static weights do not match case " + std::to_string(k));
    }
    if (c.initial_weights && c.initial_weights->size() != c.workers.size()) c.initial_weights.reset();
    ExperimentConfig eq = c;
    eq.mode = RunMode{RunModeKind::kEqual, {}};
    eq.initial_weights.reset();
    require_valid(c);
    require_valid(eq);

    const ExperimentReport r = run_experiment(c);
    const ExperimentReport e = run_experiment(eq);
    const std::string tag = "case" + std::to_string(k);
    write_csv(r, fs::path(a.out) / (tag + ".csv"));
    write_csv(e, fs::path(a.out) / (tag + "_equal.csv"));

    std::string costs;
    for (std::size_t i = 0; i < c.workers.size(); ++i) {
      costs += (i ? " " : "") + std::to_string(c.workers[i].per_sample_cost.count());
    }
    const double s = speedup(r, e);
    summary << k << ',' << costs << ',' << to_string(c.mode.kind) << ',' << join_weights(r.allocation_history.back())
            << ',' << (r.frozen_epoch ? std::to_string(*r.frozen_epoch) : "") << ','
            << mean_frozen_epoch_time(r).count() << ',' << mean_frozen_epoch_time(e).count() << ',' << s << ','
            << r.final_loss << '\n';
    std::cout << tag << ": weights " << join_weights(r.allocation_history.back()) << "  speedup vs equal " << s
              << "\n";
  }
  return kOk;
}

int cmd_verify(const std::string& range, int trials, std::uint64_t seed) {
  const auto [lo, hi] = parse_range(range);
  if (lo < 2 || hi < lo) throw UsageError("--n must satisfy 2 <= lo <= hi");
  if (trials < 1) throw UsageError("--trials must be >= 1");
  const auto r = verify_increment_solvers(lo, hi, trials, seed);
  std::cout << "instances " << r.instances << "  max residual " << r.max_residual << "\n";
  return r.max_residual < 1e-9 ? kOk : kValidation;
}

int cmd_gradcheck(const std::string& model, int trials, std::uint64_t seed, double eps) {
  if (trials < 1) throw UsageError("--trials must be >= 1");
  ModelKind kind;
  try {
    kind = parse_model_kind(model);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto r = gradcheck(kind, trials, seed, eps);
  std::cout << model << ": trials " << r.trials << "  max relative error " << r.max_relative_error << "\n";
  return r.max_relative_error < 1e-4 ? kOk : kValidation;
}

int cmd_worker(const RunArgs& a, int rank, const std::string& peers_text, bool wall_clock) {
  ExperimentConfig c = load_config(a.config);
  apply_overrides(c, a);
  require_valid(c);
  std::vector<PeerAddress> peers;
  for (const auto& p : split(peers_text, ',')) peers.push_back(parse_peer(p));
  if (peers.size() != c.workers.size()) throw UsageError("--peers must list one address per worker");
  if (rank < 0 || rank >= static_cast<int>(peers.size())) throw UsageError("--rank out of range");

  const Dataset data = make_dataset(c.dataset);
  TcpTransport transport(rank, peers);
  const WorkerReport r = run_worker(c, data, transport, WorkerOptions{wall_clock});

  nlohmann::json j;
  j["rank"] = r.rank;
  j["allocation_history"] = r.allocation_history;
  j["frozen_epoch"] = r.frozen_epoch ? nlohmann::json(*r.frozen_epoch) : nlohmann::json(nullptr);
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"weights", e.weights},
                           {"compute_ns", e.compute.count()},
                           {"sync_ns", e.sync.count()},
                           {"loss", e.loss}});
  }
  std::cout << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive sample allocation for ring-allreduce data-parallel training"};
  app.require_subcommand(1);

  RunArgs args;
  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", args.config, "experiment JSON");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", args.mode, "equal | static | adaptive");
    sub->add_option("--weights", args.weights, "comma-separated weights (static, or adaptive start)");
    sub->add_option("--epochs", args.epochs);
    sub->add_option("--seed", args.seed);
    sub->add_option("--out", args.out, "output directory");
  };

  auto* run = app.add_subcommand("run", "run one experiment, write run.csv and run.json");
  add_common(run, true);

  std::string costs;
  auto* sweep = app.add_subcommand("sweep", "run one experiment per cost vector against an equal split");
  add_common(sweep, true);
  sweep->add_option("--costs", costs, "per-sample costs in ms, e.g. \"1,2;1,5\"")->required();

  std::string range = "2..16";
  int trials = 1000;
  std::uint64_t seed = 7;
  auto* verify = app.add_subcommand("verify-allocator", "compare closed-form and linear-system increments");
  verify->add_option("--n", range, "worker count range lo..hi");
  verify->add_option("--trials", trials);
  verify->add_option("--seed", seed);

  std::string model = "mlp";
  double eps = 1e-6;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  grad->add_option("--model", model, "linear | softmax | mlp");
  grad->add_option("--trials", trials);
  grad->add_option("--seed", seed);
  grad->add_option("--eps", eps);

  int rank = 0;
  std::string peers;
  bool wall_clock = false;
  auto* worker = app.add_subcommand("worker", "one rank of a TCP ring");
  add_common(worker, true);
  worker->add_option("--rank", rank)->required();
  worker->add_option("--peers", peers, "host:port per rank, comma-separated")->required();
  worker->add_flag("--wall-clock", wall_clock, "sleep for modelled compute time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) return cmd_run(args);
    if (*sweep) return cmd_sweep(args, costs);
    if (*verify) return cmd_verify(range, trials, seed);
    if (*grad) return cmd_gradcheck(model, trials, seed, eps);
    if (*worker) return cmd_worker(args, rank, peers, wall_clock);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
