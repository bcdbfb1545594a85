#include "apgpm/model.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace apgpm {
namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

PowerModel fit_linear(const Dataset& train, const std::vector<FeatureSpec>& specs) {
  FeatureMatrix m = build_matrix(train, specs);
  if (m.specs.empty()) throw Error("no usable features to fit");
  const auto y = train.targets();
  Regression reg = ols_fit(m.values, y);
  PowerModel model;
  model.features = m.specs;
  model.coefficients = reg.coefficients;
  model.intercept = reg.intercept;
  model.train_meta["train_r2"] = reg.r_squared;
  model.train_meta["dataset_fingerprint"] = hex64(fingerprint(train));
  model.train_meta["n_train"] = train.size();
  if (reg.degenerate_target) model.train_meta["warning"] = "constant training target";
  return model;
}

std::vector<FeatureSpec> as_base(const std::vector<std::string>& counters) {
  std::vector<FeatureSpec> out;
  for (const auto& c : counters) out.push_back(FeatureSpec::base(c));
  return out;
}

}  // namespace

json TrainConfig::to_json() const {
  return {{"alpha", alpha},     {"cut_factor", cut_factor}, {"epsilon", epsilon},
          {"patience", patience}, {"top_k", top_k},       {"combined", combined},
          {"cluster_combined_only", cluster_combined_only}, {"combined_require_gain", combined_require_gain}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.cut_factor = j.value("cut_factor", c.cut_factor);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.patience = j.value("patience", c.patience);
  c.top_k = j.value("top_k", c.top_k);
  c.combined = j.value("combined", c.combined);
  c.cluster_combined_only = j.value("cluster_combined_only", c.cluster_combined_only);
  c.combined_require_gain = j.value("combined_require_gain", c.combined_require_gain);
  return c;
}

ApgpmFit fit_apgpm(const Dataset& train, const TrainConfig& config) {
  if (train.size() < 10) throw Error("APGPM training needs at least 10 records, got " + std::to_string(train.size()));
  ApgpmFit fit;
  fit.variance = drop_zero_variance(train);

  std::vector<FeatureSpec> specs;
  if (config.combined) {
    auto base = invert_negative(train, fit.variance.retained, config.alpha);
    fit.inverted = static_cast<std::size_t>(std::count_if(
        base.begin(), base.end(), [](const FeatureSpec& s) { return s.kind() == FeatureKind::Inverted; }));
    specs = generate_combined(train, base, config.alpha, config.top_k, config.combined_require_gain);
    if (config.cluster_combined_only && specs.size() > base.size()) {
      specs.erase(specs.begin(), specs.begin() + static_cast<std::ptrdiff_t>(base.size()));
    }
  } else {
    specs = as_base(fit.variance.retained);
  }
  fit.matrix = build_matrix(train, specs);
  if (fit.matrix.specs.empty()) throw Error("no usable features after evaluation");

  const auto names = fit.matrix.names();
  if (names.size() == 1) {
    fit.dendrogram.leaves = names;
    fit.clusters.cluster_of = {0};
    fit.clusters.n_clusters = 1;
  } else {
    fit.dendrogram = ward_cluster(fit.matrix.zscored(), names);
    fit.clusters = cut_dendrogram(fit.dendrogram, default_cut_threshold(train.size(), config.cut_factor));
  }

  const auto y = train.targets();
  fit.selection = select_significant(fit.clusters, fit.matrix, y, {config.epsilon, config.patience});

  std::vector<FeatureSpec> chosen;
  for (std::size_t rep : fit.selection.representatives()) chosen.push_back(fit.matrix.specs[rep]);
  fit.model = fit_linear(train, chosen);

  json& meta = fit.model.train_meta;
  meta["mode"] = config.combined ? "APGPM" : "Linear APGPM";
  meta["config"] = config.to_json();
  meta["n_counters"] = train.counter_names.size();
  meta["dropped_counters"] = fit.variance.dropped;
  meta["n_inverted"] = fit.inverted;
  meta["n_candidates"] = fit.matrix.specs.size();
  meta["n_clusters"] = fit.clusters.n_clusters;
  meta["n_selected"] = chosen.size();
  meta["selected_over_counters"] =
      static_cast<double>(chosen.size()) / static_cast<double>(std::max<std::size_t>(1, train.counter_names.size()));
  meta["r2_trajectory"] = fit.selection.r2_trajectory;
  meta["terminated_at"] = fit.selection.terminated_at;
  json trace = json::array();
  for (const auto& e : fit.selection.trace) {
    trace.push_back({{"cluster", e.cluster_id},
                     {"member", fit.matrix.specs[e.best_member].canonical()},
                     {"r2", e.r_squared},
                     {"accepted", e.accepted}});
  }
  meta["selection_trace"] = std::move(trace);
  return fit;
}

PowerModel train_apgpm(const Dataset& train, const TrainConfig& config) { return fit_apgpm(train, config).model; }

double predict(const PowerModel& model, const RateMap& rates) {
  std::vector<double> terms(model.features.size());
  for (std::size_t i = 0; i < model.features.size(); ++i) {
    terms[i] = model.coefficients[i] * evaluate_feature(model.features[i], rates);
  }
  return model.intercept + pairwise_sum(terms);
}

Predictions predict(const PowerModel& model, const Dataset& ds) {
  Predictions out;
  out.values.reserve(ds.size());
  for (const auto& r : ds.records) {
    const double v = predict(model, r);
    if (v < 0) ++out.negative;
    out.values.push_back(v);
  }
  return out;
}

PowerModel train_all_pmc(const Dataset& train) {
  const auto variance = drop_zero_variance(train);
  PowerModel model = fit_linear(train, as_base(variance.retained));
  model.train_meta["mode"] = "All-PMC";
  return model;
}

PowerModel train_k_top(const Dataset& train, std::size_t k) {
  if (k == 0) throw Error("k-top needs k >= 1");
  const auto variance = drop_zero_variance(train);
  if (k > variance.retained.size()) {
    throw Error("k-top: k = " + std::to_string(k) + " exceeds " + std::to_string(variance.retained.size()) +
                " usable counters");
  }
  const auto y = train.targets();
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& name : variance.retained) ranked.emplace_back(std::fabs(pearson(train.column(name), y)), name);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> top;
  for (std::size_t i = 0; i < k; ++i) top.push_back(ranked[i].second);
  PowerModel model = fit_linear(train, as_base(top));
  model.train_meta["mode"] = "k-top";
  model.train_meta["k"] = k;
  return model;
}

double UtilFreqModel::predict(const RunMeta& meta) const {
  auto it = slopes.find(meta.frequency_hz);
  if (it == slopes.end()) throw Error("frequency " + std::to_string(meta.frequency_hz) + " Hz not in model");
  if (!meta.utilization) throw Error("run '" + meta.benchmark_name + "' has no utilization");
  double offset = 0.0;
  if (auto o = intercept_offsets.find(meta.frequency_hz); o != intercept_offsets.end()) offset = o->second;
  return intercept + offset + it->second * *meta.utilization;
}

std::vector<double> UtilFreqModel::predict(const Dataset& ds) const {
  std::vector<double> out;
  for (const auto& r : ds.records) out.push_back(predict(r.meta));
  return out;
}

UtilFreqModel train_util_freq(const Dataset& train, const UtilFreqOptions& options) {
  std::map<double, std::size_t> count;
  for (const auto& r : train.records) {
    if (!r.meta.utilization) throw Error("record '" + r.meta.benchmark_name + "' is missing utilization");
    ++count[r.meta.frequency_hz];
  }
  for (const auto& [f, c] : count) {
    if (c < 2) throw Error("frequency " + std::to_string(f) + " Hz has fewer than 2 records");
  }
  std::vector<double> levels;
  for (const auto& kv : count) levels.push_back(kv.first);

  const auto n = static_cast<Eigen::Index>(train.size());
  const auto n_levels = static_cast<Eigen::Index>(levels.size());
  const Eigen::Index extra = options.per_frequency_intercept ? n_levels - 1 : 0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n_levels + extra);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& meta = train.records[static_cast<std::size_t>(i)].meta;
    const auto level = static_cast<Eigen::Index>(std::lower_bound(levels.begin(), levels.end(), meta.frequency_hz) - levels.begin());
    x(i, level) = *meta.utilization;
    if (extra > 0 && level > 0) x(i, n_levels + level - 1) = 1.0;
  }
  Regression reg = ols_fit(x, train.targets());
  UtilFreqModel model;
  model.intercept = reg.intercept;
  for (Eigen::Index l = 0; l < n_levels; ++l) {
    model.slopes[levels[static_cast<std::size_t>(l)]] = reg.coefficients[static_cast<std::size_t>(l)];
    if (options.per_frequency_intercept) {
      model.intercept_offsets[levels[static_cast<std::size_t>(l)]] =
          l == 0 ? 0.0 : reg.coefficients[static_cast<std::size_t>(n_levels + l - 1)];
    }
  }
  return model;
}

json model_to_json(const PowerModel& model) {
  json j;
  j["version"] = kModelSchemaVersion;
  json features = json::array();
  for (const auto& f : model.features) features.push_back(f.canonical());
  j["features"] = std::move(features);
  j["coefficients"] = model.coefficients;
  j["intercept"] = model.intercept;
  j["train_meta"] = model.train_meta;
  return j;
}

PowerModel model_from_json(const json& j) {
  try {
    const int version = j.at("version").get<int>();
    if (version != kModelSchemaVersion) {
      throw ParseError("model schema version mismatch: expected " + std::to_string(kModelSchemaVersion) +
                       ", got " + std::to_string(version));
    }
    PowerModel model;
    for (const auto& f : j.at("features")) model.features.push_back(FeatureSpec::parse(f.get<std::string>()));
    model.coefficients = j.at("coefficients").get<std::vector<double>>();
    model.intercept = j.at("intercept").get<double>();
    if (j.contains("train_meta")) model.train_meta = j["train_meta"];
    if (model.coefficients.size() != model.features.size()) {
      throw ParseError("model has " + std::to_string(model.features.size()) + " features but " +
                       std::to_string(model.coefficients.size()) + " coefficients");
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  }
}

std::string serialize_model(const PowerModel& model) { return model_to_json(model).dump(2) + "\n"; }

PowerModel deserialize_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("corrupted model file: ") + e.what());
  }
  return model_from_json(j);
}

void save_model(const PowerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_model(model);
}

PowerModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

json report_to_json(const EvalReport& r) {
  return {{"r_squared", r.r_squared}, {"mae_mean", r.mae_mean},       {"mae_median", r.mae_median},
          {"mape_mean", r.mape_mean}, {"mape_median", r.mape_median}, {"n", r.n},
          {"mape_excluded", r.mape_excluded}};
}

json evaluation_json(const Dataset& ds, const std::vector<double>& predictions) {
  json out;
  const auto truth = ds.targets();
  out["overall"] = report_to_json(evaluate(predictions, truth));
  json by = json::object();
  for (auto type : {WorkloadType::Rendering, WorkloadType::NeuralNetwork, WorkloadType::Compute, WorkloadType::Other}) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.records[i].meta.workload_type == type) {
        p.push_back(predictions[i]);
        t.push_back(truth[i]);
      }
    }
    if (p.empty()) continue;
    try {
      by[std::string(to_string(type))] = report_to_json(evaluate(p, t));
    } catch (const Error&) {
      by[std::string(to_string(type))] = nullptr;
    }
  }
  out["by_workload"] = std::move(by);
  return out;
}

}  // namespace apgpm
