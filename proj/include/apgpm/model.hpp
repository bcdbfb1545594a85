#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "apgpm/clustering.hpp"
#include "apgpm/dataset.hpp"
#include "apgpm/features.hpp"
#include "apgpm/numerics.hpp"
#include "apgpm/selection.hpp"

namespace apgpm {

inline constexpr int kModelSchemaVersion = 1;

struct PowerModel {
  std::vector<FeatureSpec> features;
  std::vector<double> coefficients;  // mA per unit of feature
  double intercept = 0.0;            // mA
  nlohmann::json train_meta = nlohmann::json::object();
};

struct TrainConfig {
  double alpha = 0.05;         // significance gate for inversion and combined candidates
  double cut_factor = 0.05;    // dendrogram cut = cut_factor * n_samples
  double epsilon = 0.01;       // R^2 growth threshold
  std::size_t patience = 5;    // examined clusters in the termination window
  std::size_t top_k = 1000;    // combined candidate cap
  bool combined = true;        // false = Linear APGPM (base counters only, no inversion)
  bool cluster_combined_only = false;
  bool combined_require_gain = true;  // combined feature must beat both of its counters

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct ApgpmFit {
  PowerModel model;
  FeatureMatrix matrix;
  Dendrogram dendrogram;
  ClusterAssignment clusters;
  SelectionResult selection;
  VarianceFilter variance;
  std::size_t inverted = 0;
};

ApgpmFit fit_apgpm(const Dataset& train, const TrainConfig& config);
PowerModel train_apgpm(const Dataset& train, const TrainConfig& config);

double predict(const PowerModel& model, const RateMap& rates);
inline double predict(const PowerModel& model, const RunRecord& record) {
  return predict(model, record.rates);
}

struct Predictions {
  std::vector<double> values;
  std::size_t negative = 0;  // reported as-is, not clamped
};
Predictions predict(const PowerModel& model, const Dataset& ds);

PowerModel train_all_pmc(const Dataset& train);
PowerModel train_k_top(const Dataset& train, std::size_t k);

// Power = slope[frequency] * utilization + intercept.
struct UtilFreqModel {
  std::map<double, double> slopes;                 // frequency Hz -> mA per unit utilization
  double intercept = 0.0;                          // shared
  std::map<double, double> intercept_offsets;      // per-frequency, only when enabled

  double predict(const RunMeta& meta) const;
  std::vector<double> predict(const Dataset& ds) const;
};

struct UtilFreqOptions {
  bool per_frequency_intercept = false;
};

UtilFreqModel train_util_freq(const Dataset& train, const UtilFreqOptions& options = {});

nlohmann::json model_to_json(const PowerModel& model);
PowerModel model_from_json(const nlohmann::json& j);
std::string serialize_model(const PowerModel& model);
PowerModel deserialize_model(std::string_view text);
void save_model(const PowerModel& model, const std::filesystem::path& path);
PowerModel load_model(const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report);

// Overall plus per-workload-type breakdown.
nlohmann::json evaluation_json(const Dataset& ds, const std::vector<double>& predictions);

}  // namespace apgpm
