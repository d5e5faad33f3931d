#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringbalance/engine.hpp"

namespace ringbalance {

inline constexpr const char* kCsvHeader = "epoch,worker,w,t_s_ns,t_w_ns,t_c_ns,T_ns,loss";

struct CsvRow {
  int epoch = 0;
  int worker = 0;
  std::int64_t w = 0;
  std::int64_t t_s_ns = 0;
  std::int64_t t_w_ns = 0;
  std::int64_t t_c_ns = 0;
  std::int64_t T_ns = 0;
  double loss = 0.0;

  bool operator==(const CsvRow&) const = default;
};

std::vector<CsvRow> csv_rows(const ExperimentReport& report);

void write_csv(const ExperimentReport& report, std::ostream& out);
// Throws std::runtime_error naming the path if it cannot be written.
void write_csv(const ExperimentReport& report, const std::filesystem::path& path);

std::vector<CsvRow> read_csv(std::istream& in);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentReport& report);
void write_json(const ExperimentReport& report, const std::filesystem::path& path);

// Mean epoch time over epochs run with the frozen allocation (all epochs if
// the run never froze).
Duration mean_frozen_epoch_time(const ExperimentReport& report);
Duration mean_frozen_compute_time(const ExperimentReport& report);

// mean frozen T of b / mean frozen T of a, so speedup(adaptive, equal) > 1
// when adapting helped. Throws ConfigMismatch unless model, dataset, C and
// epochs agree.
double speedup(const ExperimentReport& a, const ExperimentReport& b);

}  // namespace ringbalance
