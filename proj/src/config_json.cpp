#include "ringbalance/config_json.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

namespace ringbalance {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Weights read_weights(const json& j, const std::string& where) {
  try {
    return j.get<Weights>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  only_keys(j, "config",
            {"workers", "model", "dataset", "mode", "static_weights", "initial_weights", "minibatch", "C",
             "learning_rate", "weight_decay", "epochs", "link", "stability", "floor", "ts_smoothing", "seed"});

  if (j.contains("workers")) {
    const json& ws = j.at("workers");
    if (!ws.is_array()) throw ConfigError("workers: expected an array");
    int rank = 0;
    for (const json& w : ws) {
      const std::string where = "workers[" + std::to_string(rank) + "]";
      only_keys(w, where, {"per_sample_cost_ns", "jitter_sigma"});
      WorkerProfile p;
      p.rank = rank++;
      std::int64_t cost = 0;
      read(w, "per_sample_cost_ns", cost, where);
      p.per_sample_cost = Duration{cost};
      read(w, "jitter_sigma", p.jitter_sigma, where);
      c.workers.push_back(p);
    }
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    only_keys(m, "model", {"kind", "hidden"});
    std::string kind = to_string(c.model.kind);
    read(m, "kind", kind, "model");
    try {
      c.model.kind = parse_model_kind(kind);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("model.kind: ") + e.what());
    }
    read(m, "hidden", c.model.hidden, "model");
  }

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    only_keys(d, "dataset", {"source", "seed", "size", "features", "classes", "separation", "path"});
    std::string source = "synthetic";
    read(d, "source", source, "dataset");
    if (source == "synthetic") {
      c.dataset.source = DatasetSpec::Source::kSynthetic;
    } else if (source == "csv") {
      c.dataset.source = DatasetSpec::Source::kCsv;
    } else {
      throw ConfigError("dataset.source: expected synthetic or csv, got '" + source + "'");
    }
    read(d, "seed", c.dataset.seed, "dataset");
    read(d, "size", c.dataset.size, "dataset");
    read(d, "features", c.dataset.features, "dataset");
    read(d, "classes", c.dataset.classes, "dataset");
    read(d, "separation", c.dataset.separation, "dataset");
    read(d, "path", c.dataset.csv_path, "dataset");
  }

  if (j.contains("mode")) {
    std::string mode;
    read(j, "mode", mode, "config");
    try {
      c.mode.kind = parse_run_mode(mode);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("mode: ") + e.what());
    }
  }
  if (j.contains("static_weights")) c.mode.static_weights = read_weights(j.at("static_weights"), "static_weights");
  if (j.contains("initial_weights")) c.initial_weights = read_weights(j.at("initial_weights"), "initial_weights");

  read(j, "minibatch", c.minibatch, "config");
  read(j, "C", c.total_weight, "config");
  read(j, "learning_rate", c.learning_rate, "config");
  read(j, "weight_decay", c.weight_decay, "config");
  read(j, "epochs", c.epochs, "config");
  read(j, "floor", c.floor, "config");
  read(j, "ts_smoothing", c.ts_smoothing, "config");
  read(j, "seed", c.seed, "config");

  if (j.contains("link")) {
    const json& l = j.at("link");
    only_keys(l, "link", {"latency_ns", "bandwidth_bytes_per_s"});
    std::int64_t latency = c.link.latency.count();
    read(l, "latency_ns", latency, "link");
    c.link.latency = Duration{latency};
    read(l, "bandwidth_bytes_per_s", c.link.bandwidth, "link");
  }
  if (j.contains("stability")) {
    const json& s = j.at("stability");
    only_keys(s, "stability", {"tolerance", "window"});
    read(s, "tolerance", c.stability.tolerance, "stability");
    read(s, "window", c.stability.window, "stability");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["workers"] = json::array();
  for (const auto& w : c.workers) {
    j["workers"].push_back({{"per_sample_cost_ns", w.per_sample_cost.count()}, {"jitter_sigma", w.jitter_sigma}});
  }
  j["model"] = {{"kind", to_string(c.model.kind)}, {"hidden", c.model.hidden}};
  j["dataset"] = {{"source", c.dataset.source == DatasetSpec::Source::kCsv ? "csv" : "synthetic"},
                  {"seed", c.dataset.seed},
                  {"size", c.dataset.size},
                  {"features", c.dataset.features},
                  {"classes", c.dataset.classes},
                  {"separation", c.dataset.separation},
                  {"path", c.dataset.csv_path}};
  j["mode"] = to_string(c.mode.kind);
  if (c.mode.kind == RunModeKind::kStatic) j["static_weights"] = c.mode.static_weights;
  if (c.initial_weights) j["initial_weights"] = *c.initial_weights;
  j["minibatch"] = c.minibatch;
  j["C"] = c.total_weight;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["epochs"] = c.epochs;
  j["link"] = {{"latency_ns", c.link.latency.count()}, {"bandwidth_bytes_per_s", c.link.bandwidth}};
  j["stability"] = {{"tolerance", c.stability.tolerance}, {"window", c.stability.window}};
  j["floor"] = c.floor;
  j["ts_smoothing"] = c.ts_smoothing;
  j["seed"] = c.seed;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ringbalance
