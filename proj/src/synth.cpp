#include "apgpm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace apgpm::synth {
namespace {

using nlohmann::json;

// Portable draws: the standard distributions are implementation-defined.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string relation_name(RelationKind k) {
  switch (k) {
    case RelationKind::Scale: return "scale";
    case RelationKind::SumOf: return "sum_of";
    case RelationKind::NoiseCopy: return "noise_copy";
  }
  return "scale";
}

RelationKind parse_relation(const std::string& s) {
  if (s == "scale") return RelationKind::Scale;
  if (s == "sum_of") return RelationKind::SumOf;
  if (s == "noise_copy") return RelationKind::NoiseCopy;
  throw ParseError("unknown counter relation '" + s + "'");
}

}  // namespace

json SynthConfig::to_json() const {
  json j;
  j["n_runs"] = n_runs;
  j["intercept"] = intercept;
  j["noise_sigma"] = noise_sigma;
  j["seed"] = seed;
  j["frequencies"] = frequencies;
  j["utilization"] = utilization ? json(*utilization) : json(nullptr);
  for (const auto& f : factors) {
    j["factors"].push_back({{"name", f.name}, {"lo", f.lo}, {"hi", f.hi}, {"coefficient", f.coefficient}});
  }
  for (const auto& fam : families) {
    json counters = json::array();
    for (const auto& c : fam.counters) {
      json cj{{"name", c.name}, {"relation", relation_name(c.relation)}};
      if (c.relation == RelationKind::Scale) cj["scale"] = c.scale;
      if (c.relation == RelationKind::SumOf) cj["of"] = {c.sibling_a, c.sibling_b};
      if (c.relation == RelationKind::NoiseCopy) cj["sigma"] = c.sigma;
      counters.push_back(std::move(cj));
    }
    j["families"].push_back({{"factor", fam.factor}, {"counters", std::move(counters)}});
  }
  return j;
}

SynthConfig SynthConfig::from_json(const json& j) {
  try {
    SynthConfig c;
    c.n_runs = j.value("n_runs", c.n_runs);
    c.intercept = j.value("intercept", c.intercept);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.seed = j.value("seed", c.seed);
    if (j.contains("frequencies")) c.frequencies = j["frequencies"].get<std::vector<double>>();
    if (j.contains("utilization") && !j["utilization"].is_null()) c.utilization = j["utilization"].get<double>();
    for (const auto& f : j.at("factors")) {
      c.factors.push_back({f.at("name").get<std::string>(), f.at("lo").get<double>(), f.at("hi").get<double>(),
                           f.value("coefficient", 0.0)});
    }
    for (const auto& fam : j.at("families")) {
      Family family{fam.at("factor").get<std::string>(), {}};
      for (const auto& cj : fam.at("counters")) {
        CounterDef d;
        d.name = cj.at("name").get<std::string>();
        d.relation = parse_relation(cj.value("relation", std::string("scale")));
        d.scale = cj.value("scale", 1.0);
        d.sigma = cj.value("sigma", 0.0);
        if (d.relation == RelationKind::SumOf) {
          auto of = cj.at("of").get<std::vector<std::string>>();
          if (of.size() != 2) throw ParseError("sum_of needs exactly two siblings");
          d.sibling_a = of[0];
          d.sibling_b = of[1];
        }
        family.counters.push_back(std::move(d));
      }
      c.families.push_back(std::move(family));
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed synth config: ") + e.what());
  }
}

json GroundTruth::to_json() const {
  return {{"factor_of_counter", factor_of_counter},
          {"multiplier", multiplier},
          {"true_coefficients", true_coefficients},
          {"true_intercept", true_intercept}};
}

Generated generate(const SynthConfig& config) {
  if (config.factors.empty()) throw Error("synth: at least one latent factor required");
  if (config.n_runs < 3) throw Error("synth: at least 3 runs required");
  if (config.frequencies.empty()) throw Error("synth: at least one frequency level required");
  std::map<std::string, std::size_t> factor_index;
  for (std::size_t i = 0; i < config.factors.size(); ++i) {
    const auto& f = config.factors[i];
    if (!(f.hi >= f.lo) || f.lo < 0) throw Error("synth: factor '" + f.name + "' has an invalid range");
    if (!factor_index.emplace(f.name, i).second) throw Error("synth: duplicate factor '" + f.name + "'");
  }

  Generated out;
  GroundTruth& truth = out.truth;
  truth.true_intercept = config.intercept;
  for (const auto& f : config.factors) truth.true_coefficients[f.name] = f.coefficient;

  std::set<std::string> names;
  for (const auto& fam : config.families) {
    if (!factor_index.contains(fam.factor)) throw Error("synth: family references unknown factor '" + fam.factor + "'");
    std::set<std::string> defined;
    for (const auto& c : fam.counters) {
      if (!names.insert(c.name).second) throw Error("synth: duplicate counter '" + c.name + "'");
      if (c.relation == RelationKind::SumOf &&
          (!defined.contains(c.sibling_a) || !defined.contains(c.sibling_b))) {
        throw Error("synth: counter '" + c.name + "' sums siblings not defined earlier in family '" + fam.factor + "'");
      }
      defined.insert(c.name);
      truth.factor_of_counter[c.name] = fam.factor;
      switch (c.relation) {
        case RelationKind::Scale: truth.multiplier[c.name] = c.scale; break;
        case RelationKind::SumOf:
          if (truth.multiplier.contains(c.sibling_a) && truth.multiplier.contains(c.sibling_b)) {
            truth.multiplier[c.name] = truth.multiplier[c.sibling_a] + truth.multiplier[c.sibling_b];
          }
          break;
        case RelationKind::NoiseCopy: break;
      }
      out.dataset.counter_names.push_back(c.name);
    }
  }
  if (out.dataset.counter_names.empty()) throw Error("synth: no counters defined");

  static constexpr WorkloadType kTypes[] = {WorkloadType::Compute, WorkloadType::Rendering, WorkloadType::NeuralNetwork};
  std::mt19937_64 rng(config.seed);
  for (std::size_t run = 0; run < config.n_runs; ++run) {
    std::vector<double> level(config.factors.size());
    double util_sum = 0.0;
    for (std::size_t i = 0; i < config.factors.size(); ++i) {
      const auto& f = config.factors[i];
      const double u = uniform01(rng);
      level[i] = f.lo + u * (f.hi - f.lo);
      util_sum += u;
    }
    RunRecord record;
    for (const auto& fam : config.families) {
      const double base = level[factor_index.at(fam.factor)];
      for (const auto& c : fam.counters) {
        double v = 0.0;
        switch (c.relation) {
          case RelationKind::Scale: v = c.scale * base; break;
          case RelationKind::SumOf: v = record.rates.at(c.sibling_a) + record.rates.at(c.sibling_b); break;
          case RelationKind::NoiseCopy: v = std::max(0.0, base * (1.0 + c.sigma * gaussian(rng))); break;
        }
        record.rates[c.name] = v;
      }
    }
    std::vector<double> terms;
    for (std::size_t i = 0; i < config.factors.size(); ++i) terms.push_back(config.factors[i].coefficient * level[i]);
    const double clean = config.intercept + pairwise_sum(terms);
    double current = clean;
    if (config.noise_sigma > 0) current = std::max(0.0, clean * (1.0 + config.noise_sigma * gaussian(rng)));

    char name[32];
    std::snprintf(name, sizeof name, "synth_%04zu", run);
    record.meta.benchmark_name = name;
    record.meta.workload_type = kTypes[run % 3];
    record.meta.frequency_hz = config.frequencies[run % config.frequencies.size()];
    record.meta.utilization =
        config.utilization ? *config.utilization
                           : std::clamp(util_sum / static_cast<double>(config.factors.size()), 0.0, 1.0);
    record.total_current = current;
    record.target_current = current;
    out.dataset.records.push_back(std::move(record));
  }
  return out;
}

SynthConfig three_factor_profile(std::size_t n_runs, double noise_sigma, std::uint64_t seed) {
  SynthConfig c;
  c.n_runs = n_runs;
  c.noise_sigma = noise_sigma;
  c.seed = seed;
  c.intercept = 10.0;
  c.factors = {{"f1", 10.0, 100.0, 2.0}, {"f2", 20.0, 200.0, 1.0}, {"f3", 40.0, 400.0, 0.5}};
  for (const auto& f : c.factors) {
    Family fam{f.name, {}};
    fam.counters.push_back({f.name + "_base", RelationKind::Scale, 1.0, {}, {}, 0.0});
    fam.counters.push_back({f.name + "_x8", RelationKind::Scale, 8.0, {}, {}, 0.0});
    fam.counters.push_back({f.name + "_sum", RelationKind::SumOf, 1.0, f.name + "_base", f.name + "_x8", 0.0});
    c.families.push_back(std::move(fam));
  }
  return c;
}

SynthConfig collinear_profile(std::size_t n_runs, double noise_sigma, std::uint64_t seed) {
  SynthConfig c;
  c.n_runs = n_runs;
  c.noise_sigma = noise_sigma;
  c.seed = seed;
  c.intercept = 20.0;
  c.factors = {{"f1", 10.0, 100.0, 3.0}, {"f2", 10.0, 100.0, 1.0}, {"f3", 10.0, 100.0, 1.0}};
  auto scale = [](std::string name, double s) { return CounterDef{std::move(name), RelationKind::Scale, s, {}, {}, 0.0}; };
  auto sum = [](std::string name, std::string a, std::string b) {
    return CounterDef{std::move(name), RelationKind::SumOf, 1.0, std::move(a), std::move(b), 0.0};
  };
  auto noisy = [](std::string name, double sigma) { return CounterDef{std::move(name), RelationKind::NoiseCopy, 1.0, {}, {}, sigma}; };
  c.families.push_back({"f1",
                        {scale("f1_rd", 1.0), scale("f1_wr", 2.0), sum("f1_total", "f1_rd", "f1_wr"),
                         scale("f1_beats", 8.0), scale("f1_bytes", 64.0), scale("f1_words", 16.0),
                         sum("f1_rd_beats", "f1_rd", "f1_beats"), scale("f1_lines", 0.5), noisy("f1_approx", 0.01),
                         noisy("f1_approx_b", 0.02)}});
  c.families.push_back({"f2", {scale("f2_base", 1.0), scale("f2_x8", 8.0), sum("f2_sum", "f2_base", "f2_x8"),
                               scale("f2_x2", 2.0), noisy("f2_approx", 0.01), noisy("f2_approx_b", 0.02)}});
  c.families.push_back({"f3", {scale("f3_base", 1.0), scale("f3_x4", 4.0), sum("f3_sum", "f3_base", "f3_x4"),
                               scale("f3_x2", 2.0), noisy("f3_approx", 0.01), noisy("f3_approx_b", 0.02)}});
  return c;
}

SynthConfig instruction_mix_profile(std::size_t n_runs, double noise_sigma, std::uint64_t seed) {
  SynthConfig c = three_factor_profile(n_runs, noise_sigma, seed);
  c.utilization = 0.6;
  c.frequencies = {251e6, 471e6, 701e6};
  return c;
}

SynthConfig profile(std::string_view name, std::size_t n_runs, double noise_sigma, std::uint64_t seed) {
  if (name == "three-factor") return three_factor_profile(n_runs, noise_sigma, seed);
  if (name == "collinear") return collinear_profile(n_runs, noise_sigma, seed);
  if (name == "instruction-mix") return instruction_mix_profile(n_runs, noise_sigma, seed);
  throw UsageError("unknown synth profile '" + std::string(name) + "'");
}

RecoveryReport verify_recovery(const SelectionResult& selection, const FeatureMatrix& matrix, const PowerModel& model,
                               const GroundTruth& truth) {
  RecoveryReport report;
  auto factor_of_spec = [&](const FeatureSpec& spec) -> std::string {
    std::string factor;
    for (const auto& counter : spec.counters()) {
      auto it = truth.factor_of_counter.find(counter);
      if (it == truth.factor_of_counter.end()) return {};
      if (!factor.empty() && factor != it->second) return {};
      factor = it->second;
    }
    return factor;
  };

  std::set<std::string> seen;
  for (const auto& cluster : selection.significant) {
    std::string factor;
    bool single = true;
    for (std::size_t m : cluster.members) {
      const std::string f = factor_of_spec(matrix.specs.at(m));
      if (f.empty() || (!factor.empty() && f != factor)) {
        single = false;
        break;
      }
      factor = f;
    }
    if (!single) {
      report.clusters_single_factor = false;
      report.clusters_distinct_factors = false;
      report.cluster_factors.emplace_back();
      continue;
    }
    if (!seen.insert(factor).second) report.clusters_distinct_factors = false;
    report.cluster_factors.push_back(factor);
  }

  // Coefficients are comparable only when each model feature is a single
  // exact multiple of a distinct factor and every active factor is covered.
  std::set<std::string> covered;
  double worst = 0.0;
  for (std::size_t i = 0; i < model.features.size(); ++i) {
    const auto& spec = model.features[i];
    if (spec.kind() != FeatureKind::Base && spec.kind() != FeatureKind::Inverted) return report;
    auto mult = truth.multiplier.find(spec.first());
    if (mult == truth.multiplier.end()) return report;
    const std::string& factor = truth.factor_of_counter.at(spec.first());
    if (!covered.insert(factor).second) return report;
    double expected = truth.true_coefficients.at(factor) / mult->second;
    if (spec.kind() == FeatureKind::Inverted) expected = -expected;
    const double scale = std::max(std::fabs(expected), 1e-300);
    worst = std::max(worst, std::fabs(model.coefficients[i] - expected) / scale);
  }
  for (const auto& [factor, coef] : truth.true_coefficients) {
    if (coef != 0.0 && !covered.contains(factor)) return report;
  }
  const double intercept_scale = std::max(std::fabs(truth.true_intercept), 1.0);
  worst = std::max(worst, std::fabs(model.intercept - truth.true_intercept) / intercept_scale);
  report.coefficient_error = worst;
  return report;
}

void write_dataset(const Generated& generated, const std::filesystem::path& dir, double duration_s, std::size_t dumps) {
  if (!(duration_s >= 1.0) || dumps < 1) throw Error("synth: traces must span at least 1 s with at least one dump");
  std::filesystem::create_directories(dir);
  const Dataset& ds = generated.dataset;
  const double dt_s = duration_s / static_cast<double>(dumps);
  json manifest;
  manifest["runs"] = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const RunRecord& r = ds.records[i];
    const std::string stem = r.meta.benchmark_name;

    std::string counters = "ts_ms";
    for (const auto& name : ds.counter_names) counters += "," + name;
    counters += "\n0";
    for (std::size_t c = 0; c < ds.counter_names.size(); ++c) counters += ",0";
    counters += "\n";
    std::string power = "ts_ms,current_ma\n0," + format_double(r.total_current) + "\n";
    for (std::size_t k = 1; k <= dumps; ++k) {
      const std::string ts = format_double(1000.0 * dt_s * static_cast<double>(k));
      counters += ts;
      for (const auto& name : ds.counter_names) counters += "," + format_double(r.rates.at(name) * dt_s);
      counters += "\n";
      power += ts + "," + format_double(r.total_current) + "\n";
    }
    write_text(dir / (stem + "_counters.csv"), counters);
    write_text(dir / (stem + "_power.csv"), power);

    json run{{"counter_file", stem + "_counters.csv"},
             {"power_file", stem + "_power.csv"},
             {"benchmark", stem},
             {"workload_type", std::string(to_string(r.meta.workload_type))},
             {"frequency_hz", r.meta.frequency_hz}};
    if (r.meta.utilization) run["utilization"] = *r.meta.utilization;
    manifest["runs"].push_back(std::move(run));
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "ground_truth.json", generated.truth.to_json().dump(2) + "\n");
}

}  // namespace apgpm::synth
