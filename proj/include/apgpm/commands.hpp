#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "apgpm/model.hpp"

namespace apgpm {

// Everything a command needs. Defaults are the published pipeline constants.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "apgpm_out";
  std::optional<std::filesystem::path> aux_model;
  double base_current = 0.0;  // mA
  TrainConfig train;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t seed = 7;
  bool frequency_as_counter = true;
  std::optional<std::size_t> k_top;  // defaults to APGPM's feature count
  bool per_frequency_intercept = false;

  nlohmann::json to_json() const;
  // Relative paths are resolved against base_dir.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
};

struct LoadedData {
  Dataset all;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  IsolationStats isolation;

  Dataset train() const { return subset(all, train_idx); }
  Dataset test() const { return subset(all, test_idx); }
};

LoadedData load_and_split(const RunConfig& config);

struct TrainOutcome {
  ApgpmFit fit;
  EvalReport train;
  EvalReport test;
};

// Writes model.json, selection_trace.txt, dendrogram.json, report.json and
// predictions.csv into config.output_dir.
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

enum class SplitChoice { All, Train, Test };

// Evaluation report for a saved model on the chosen split of the manifest.
nlohmann::json cmd_eval(const RunConfig& config, const std::filesystem::path& model_path, SplitChoice split);

// CSV `benchmark,workload_type,target_ma,predicted_ma` for every run.
std::string cmd_predict(const RunConfig& config, const std::filesystem::path& model_path);

struct CompareRow {
  std::string model;
  std::size_t n_features = 0;
  std::optional<EvalReport> test;  // empty when the baseline is not applicable
  std::string note;
};

// Trains APGPM, Linear APGPM, util-freq, All-PMC and k-top on the training
// split and evaluates each on the test split. Writes compare.json/compare.csv.
std::vector<CompareRow> cmd_compare(const RunConfig& config, std::ostream& log);
std::string format_compare_table(const std::vector<CompareRow>& rows);

void cmd_synth(const std::string& profile_name, const std::optional<std::filesystem::path>& config_path,
               std::size_t n_runs, double noise_sigma, std::uint64_t seed, const std::filesystem::path& out_dir);

// Energy per inference in mWs: current (mA) * voltage (V) * latency (ms) / 1000.
double cmd_energy(double current_ma, double voltage_v, double latency_ms);

}  // namespace apgpm
