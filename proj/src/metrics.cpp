#include "ringbalance/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ringbalance/config_json.hpp"

namespace ringbalance {

using nlohmann::json;

std::vector<CsvRow> csv_rows(const ExperimentReport& report) {
  std::vector<CsvRow> rows;
  for (const auto& e : report.epochs) {
    for (std::size_t i = 0; i < e.weights.size(); ++i) {
      CsvRow r;
      r.epoch = e.epoch;
      r.worker = static_cast<int>(i);
      r.w = e.weights[i];
      r.t_s_ns = e.timing.t_s[i].count();
      r.t_w_ns = e.timing.t_w[i].count();
      r.t_c_ns = e.timing.t_c.count();
      r.T_ns = e.timing.total[i].count();
      r.loss = e.loss;
      rows.push_back(r);
    }
  }
  return rows;
}

static std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv(const ExperimentReport& report, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : csv_rows(report)) {
    out << r.epoch << ',' << r.worker << ',' << r.w << ',' << r.t_s_ns << ',' << r.t_w_ns << ',' << r.t_c_ns << ','
        << r.T_ns << ',' << shortest(r.loss) << '\n';
  }
}

void write_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(report, out);
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

namespace {

template <typename T>
T field(std::string_view text, int line) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad field '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error("csv: unexpected header");
  std::vector<CsvRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> parts;
    std::string_view rest(line);
    for (;;) {
      auto comma = rest.find(',');
      parts.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (parts.size() != 8) throw std::runtime_error("csv line " + std::to_string(lineno) + ": expected 8 fields");
    CsvRow r;
    r.epoch = field<int>(parts[0], lineno);
    r.worker = field<int>(parts[1], lineno);
    r.w = field<std::int64_t>(parts[2], lineno);
    r.t_s_ns = field<std::int64_t>(parts[3], lineno);
    r.t_w_ns = field<std::int64_t>(parts[4], lineno);
    r.t_c_ns = field<std::int64_t>(parts[5], lineno);
    r.T_ns = field<std::int64_t>(parts[6], lineno);
    r.loss = field<double>(parts[7], lineno);
    rows.push_back(r);
  }
  return rows;
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_csv(in);
}

static json durations(const std::vector<Duration>& ds) {
  json a = json::array();
  for (Duration d : ds) a.push_back(d.count());
  return a;
}

json to_json(const ExperimentReport& report) {
  json j;
  j["config"] = config_to_json(report.config);
  j["epochs"] = json::array();
  for (const auto& e : report.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"weights", e.weights},
                           {"aggregations", e.aggregations},
                           {"t_s_ns", durations(e.timing.t_s)},
                           {"t_w_ns", durations(e.timing.t_w)},
                           {"t_c_ns", e.timing.t_c.count()},
                           {"T_ns", durations(e.timing.total)},
                           {"loss", e.loss}});
  }
  j["allocation_history"] = report.allocation_history;
  j["rebalances"] = json::array();
  for (const auto& r : report.rebalances) {
    j["rebalances"].push_back({{"epoch", r.epoch},
                               {"t_s_ns", durations(r.t_s)},
                               {"rates", r.rates},
                               {"increments", r.increments},
                               {"target", r.target},
                               {"before", r.before},
                               {"after", r.after},
                               {"froze", r.froze}});
  }
  j["frozen_allocation"] = report.frozen_allocation ? json(*report.frozen_allocation) : json(nullptr);
  j["frozen_epoch"] = report.frozen_epoch ? json(*report.frozen_epoch) : json(nullptr);
  j["virtual_time_ns"] = report.virtual_time.count();
  j["final_loss"] = report.final_loss;
  j["final_params"] = report.final_params;
  return j;
}

void write_json(const ExperimentReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(report).dump(2) << '\n';
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

namespace {

template <typename F>
Duration mean_over_frozen(const ExperimentReport& report, F value) {
  const int from = report.frozen_epoch.value_or(1);
  std::int64_t sum = 0, count = 0;
  for (const auto& e : report.epochs) {
    if (e.epoch < from) continue;
    sum += value(e).count();
    ++count;
  }
  if (count == 0) throw std::invalid_argument("report has no epochs after the allocation froze");
  return Duration{sum / count};
}

}  // namespace

Duration mean_frozen_epoch_time(const ExperimentReport& report) {
  return mean_over_frozen(report, [](const EpochReport& e) { return e.epoch_time(); });
}

Duration mean_frozen_compute_time(const ExperimentReport& report) {
  return mean_over_frozen(report, [](const EpochReport& e) { return e.compute_time(); });
}

double speedup(const ExperimentReport& a, const ExperimentReport& b) {
  const auto& ca = a.config;
  const auto& cb = b.config;
  if (ca.total_weight != cb.total_weight) throw ConfigMismatch("speedup: C differs");
  if (ca.epochs != cb.epochs) throw ConfigMismatch("speedup: epoch count differs");
  if (ca.model.kind != cb.model.kind || ca.model.hidden != cb.model.hidden) throw ConfigMismatch("speedup: model differs");
  const auto& da = ca.dataset;
  const auto& db = cb.dataset;
  if (da.source != db.source || da.seed != db.seed || da.size != db.size || da.features != db.features ||
      da.classes != db.classes || da.separation != db.separation || da.csv_path != db.csv_path) {
    throw ConfigMismatch("speedup: dataset differs");
  }
  const double ta = static_cast<double>(mean_frozen_epoch_time(a).count());
  const double tb = static_cast<double>(mean_frozen_epoch_time(b).count());
  if (ta <= 0.0) throw std::invalid_argument("speedup: zero epoch time");
  return tb / ta;
}

}  // namespace ringbalance
