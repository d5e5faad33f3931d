#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringbalance {

// Virtual time is integer nanoseconds so T = t_s + t_w + t_c holds exactly.
using Duration = std::chrono::nanoseconds;

// Samples per worker per gradient aggregation.
using Weights = std::vector<std::int64_t>;

inline double to_seconds(Duration d) { return static_cast<double>(d.count()) * 1e-9; }

// ---------------------------------------------------------------------------
// Errors. Every failure the library reports is one of these.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RINGBALANCE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

RINGBALANCE_ERROR(ZeroTiming);
RINGBALANCE_ERROR(SingularMatrix);
RINGBALANCE_ERROR(InfeasibleFloor);
RINGBALANCE_ERROR(LengthMismatch);
RINGBALANCE_ERROR(TransportClosed);
RINGBALANCE_ERROR(FrameCorrupt);
RINGBALANCE_ERROR(DimMismatch);
RINGBALANCE_ERROR(InsufficientSamples);
RINGBALANCE_ERROR(ZeroSampleCount);
RINGBALANCE_ERROR(DatasetTooSmall);
RINGBALANCE_ERROR(ConfigMismatch);
RINGBALANCE_ERROR(InvariantViolation);
RINGBALANCE_ERROR(ConfigError);

#undef RINGBALANCE_ERROR

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct WorkerProfile {
  int rank = 0;
  Duration per_sample_cost{0};
  double jitter_sigma = 0.0;

  // Samples per second when jitter is off.
  double speed() const { return 1.0 / to_seconds(per_sample_cost); }
};

struct AllocationState {
  Weights weights;
  std::int64_t total = 0;
  int epoch = 0;
  // Every weight vector the run has used, oldest first; the last entry is
  // the current one.
  std::vector<Weights> history;

  static AllocationState initial(Weights w);
};

struct EpochTiming {
  std::vector<Duration> t_s;
  std::vector<Duration> t_w;
  Duration t_c{0};
  std::vector<Duration> total;

  // Builds a timing record from compute times and the shared aggregation
  // time; waiting times follow from the barrier.
  static EpochTiming from_compute(std::vector<Duration> t_s, Duration t_c);
  EpochTiming& operator+=(const EpochTiming& other);
};

struct GradientBuffer {
  std::vector<double> values;
  std::int64_t sample_count = 0;

  GradientBuffer() = default;
  explicit GradientBuffer(std::size_t length) : values(length, 0.0) {}

  std::size_t size() const { return values.size(); }
  void clear();
};

enum class ModelKind { kLinearRegression, kSoftmax, kMlp };

struct ModelSpec {
  ModelKind kind = ModelKind::kSoftmax;
  int hidden = 16;  // MLP only
};

struct DatasetSpec {
  enum class Source { kSynthetic, kCsv };
  Source source = Source::kSynthetic;
  std::uint64_t seed = 1;
  std::int64_t size = 1000;
  int features = 4;
  int classes = 2;
  double separation = 4.0;
  std::string csv_path;
};

enum class RunModeKind { kEqual, kStatic, kAdaptive };

struct RunMode {
  RunModeKind kind = RunModeKind::kAdaptive;
  Weights static_weights;  // kStatic only
};

struct CostModel {
  Duration latency{0};
  double bandwidth = 1e9;  // bytes per second
};

struct StabilityRule {
  std::int64_t tolerance = 1;
  int window = 2;
};

struct ExperimentConfig {
  std::vector<WorkerProfile> workers;
  ModelSpec model;
  DatasetSpec dataset;
  RunMode mode;
  std::optional<Weights> initial_weights;  // adaptive start; equal split if unset
  std::int64_t minibatch = 1;
  std::int64_t total_weight = 20;  // C
  double learning_rate = 1e-2;
  double weight_decay = 1e-4;
  int epochs = 10;
  CostModel link{Duration{50'000}, 1e9};
  StabilityRule stability;
  std::int64_t floor = 1;
  // Exponential smoothing coefficient for per-sample compute time; 0 is off.
  double ts_smoothing = 0.0;
  std::uint64_t seed = 7;
};

// Returns human-readable invariant violations; empty means the config is
// runnable.
std::vector<std::string> validate(const ExperimentConfig& config);

std::string to_string(ModelKind kind);
std::string to_string(RunModeKind kind);
ModelKind parse_model_kind(const std::string& text);
RunModeKind parse_run_mode(const std::string& text);

}  // namespace ringbalance
