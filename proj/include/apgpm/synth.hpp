#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "apgpm/dataset.hpp"
#include "apgpm/model.hpp"
#include "apgpm/selection.hpp"

namespace apgpm::synth {

struct Factor {
  std::string name;
  double lo = 1.0;
  double hi = 2.0;
  double coefficient = 0.0;  // mA per unit of factor
};

enum class RelationKind { Scale, SumOf, NoiseCopy };

struct CounterDef {
  std::string name;
  RelationKind relation = RelationKind::Scale;
  double scale = 1.0;                 // Scale
  std::string sibling_a, sibling_b;   // SumOf
  double sigma = 0.0;                 // NoiseCopy, relative
};

struct Family {
  std::string factor;
  std::vector<CounterDef> counters;
};

struct SynthConfig {
  std::size_t n_runs = 120;
  std::vector<Factor> factors;
  double intercept = 0.0;            // mA
  std::vector<Family> families;
  double noise_sigma = 0.0;          // relative Gaussian noise on current
  std::uint64_t seed = 1;
  std::vector<double> frequencies{701e6};
  std::optional<double> utilization;  // fixed value; otherwise mean normalized factor level

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct GroundTruth {
  std::map<std::string, std::string> factor_of_counter;
  // counter = multiplier * factor, exactly; absent for noisy copies
  std::map<std::string, double> multiplier;
  std::map<std::string, double> true_coefficients;
  double true_intercept = 0.0;

  nlohmann::json to_json() const;
};

struct Generated {
  Dataset dataset;
  GroundTruth truth;
};

Generated generate(const SynthConfig& config);

// Three factors, each with a base counter, a x8 conversion copy and a
// derived sum of the two; power = 2 f1 + 1 f2 + 0.5 f3 + 10.
SynthConfig three_factor_profile(std::size_t n_runs = 120, double noise_sigma = 0.0,
                                 std::uint64_t seed = 1);

// Three factors where f1 dominates power and owns the largest counter family,
// so ranking counters by correlation alone picks redundant f1 copies.
SynthConfig collinear_profile(std::size_t n_runs = 120, double noise_sigma = 0.05, std::uint64_t seed = 1);

// The three-factor power law with utilization pinned to one value for every
// run and three frequency levels: utilization cannot explain power.
SynthConfig instruction_mix_profile(std::size_t n_runs = 120, double noise_sigma = 0.05, std::uint64_t seed = 1);

// Looks up "three-factor", "collinear" or "instruction-mix".
SynthConfig profile(std::string_view name, std::size_t n_runs, double noise_sigma, std::uint64_t seed);

struct RecoveryReport {
  bool clusters_single_factor = true;
  bool clusters_distinct_factors = true;
  std::vector<std::string> cluster_factors;  // "" when a cluster spans factors
  std::optional<double> coefficient_error;   // max relative error, 1:1 mapping only
};

RecoveryReport verify_recovery(const SelectionResult& selection, const FeatureMatrix& matrix,
                               const PowerModel& model, const GroundTruth& truth);

// Writes counter/power CSVs per run, manifest.json and ground_truth.json.
void write_dataset(const Generated& generated, const std::filesystem::path& dir,
                   double duration_s = 10.0, std::size_t dumps = 10);

}  // namespace apgpm::synth
