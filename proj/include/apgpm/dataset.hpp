#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apgpm/error.hpp"

namespace apgpm {

struct PowerModel;

// Per-counter event rate (events/second), keyed by counter name.
using RateMap = std::map<std::string, double>;

struct CounterSample {
  double ts_ms = 0.0;
  std::vector<double> counts;  // deltas since the previous sample
};

struct CounterTrace {
  std::vector<std::string> counter_names;
  std::vector<CounterSample> samples;
};

struct PowerSample {
  double ts_ms = 0.0;
  double current_ma = 0.0;
};

struct PowerTrace {
  std::vector<PowerSample> samples;
  std::optional<double> voltage_v;
};

enum class WorkloadType { Rendering, NeuralNetwork, Compute, Other };

std::string_view to_string(WorkloadType type);
WorkloadType parse_workload_type(std::string_view text);

struct RunMeta {
  std::string benchmark_name;
  WorkloadType workload_type = WorkloadType::Other;
  double frequency_hz = 0.0;
  std::optional<double> utilization;
};

struct RunRecord {
  RunMeta meta;
  RateMap rates;
  double total_current = 0.0;   // mA
  double target_current = 0.0;  // mA, after isolation
};

struct Dataset {
  std::vector<std::string> counter_names;
  std::vector<RunRecord> records;

  std::size_t size() const { return records.size(); }
  // Rates of one counter across all records, in record order.
  std::vector<double> column(const std::string& counter) const;
  std::vector<double> targets() const;
};

// Parses `ts_ms,<counter>...` CSV. Counts are deltas since the previous row.
// Counter names may not contain '*' or '/' (reserved by the feature-spec text form).
CounterTrace parse_counter_trace(std::string_view text);

// Parses `ts_ms,current_ma[,voltage_v]` CSV.
PowerTrace parse_power_trace(std::string_view text);

// Averages both traces over their common time window. The first counter row
// only anchors the window; its counts are attributed to time before it.
// Counter intervals that straddle the window edge are prorated linearly.
// Current is treated as sample-and-hold.
RunRecord aggregate_run(const CounterTrace& counters, const PowerTrace& power, RunMeta meta);

struct IsolationStats {
  std::size_t clamped = 0;
};

// target = total - base - aux_model(aux_rates), clamped at 0.
RunRecord isolate_power(const RunRecord& record, double base_current,
                        const PowerModel* aux_model = nullptr, const RateMap* aux_rates = nullptr,
                        IsolationStats* stats = nullptr);

// Seeded Fisher-Yates shuffle, then the first ceil(n * train_fraction) records go to train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed);

// Indices (into ds.records) that split_dataset assigns to the training half.
std::vector<std::size_t> train_indices(std::size_t n, double train_fraction, std::uint64_t seed);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

// 64-bit FNV-1a over counter names, metadata and rate bit patterns.
std::uint64_t fingerprint(const Dataset& ds);

// ---------------------------------------------------------------------------
// Manifest-driven loading

struct ManifestRun {
  std::filesystem::path counter_file;
  std::filesystem::path power_file;
  std::optional<std::filesystem::path> aux_counter_file;
  RunMeta meta;
};

struct Manifest {
  std::vector<ManifestRun> runs;
};

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

struct LoadOptions {
  double base_current = 0.0;           // mA
  const PowerModel* aux_model = nullptr;
  bool frequency_as_counter = true;    // adds a `frequency_hz` rate column
};

struct LoadResult {
  Dataset dataset;
  IsolationStats isolation;
};

LoadResult load_dataset(const Manifest& manifest, const LoadOptions& options);

inline constexpr const char* kFrequencyCounter = "frequency_hz";

std::string read_file(const std::filesystem::path& path);

}  // namespace apgpm
