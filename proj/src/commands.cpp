#include "apgpm/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "apgpm/synth.hpp"

namespace apgpm {
namespace {

using nlohmann::json;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

json names_of(const Dataset& ds) {
  json out = json::array();
  for (const auto& r : ds.records) out.push_back(r.meta.benchmark_name);
  return out;
}

}  // namespace

json RunConfig::to_json() const {
  json j = train.to_json();
  j["manifest"] = manifest.string();
  j["output_dir"] = output_dir.string();
  j["aux_model"] = aux_model ? json(aux_model->string()) : json(nullptr);
  j["base_current_ma"] = base_current;
  j["train_fraction"] = train_fraction;
  j["seed"] = seed;
  j["frequency_as_counter"] = frequency_as_counter;
  j["k_top"] = k_top ? json(*k_top) : json(nullptr);
  j["per_frequency_intercept"] = per_frequency_intercept;
  return j;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  try {
    RunConfig c;
    c.train = TrainConfig::from_json(j);
    if (j.contains("manifest")) c.manifest = resolve(base_dir, j["manifest"].get<std::string>());
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("aux_model") && !j["aux_model"].is_null()) c.aux_model = resolve(base_dir, j["aux_model"].get<std::string>());
    c.base_current = j.value("base_current_ma", c.base_current);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.seed = j.value("seed", c.seed);
    c.frequency_as_counter = j.value("frequency_as_counter", c.frequency_as_counter);
    if (j.contains("k_top") && !j["k_top"].is_null()) c.k_top = j["k_top"].get<std::size_t>();
    c.per_frequency_intercept = j.value("per_frequency_intercept", c.per_frequency_intercept);
    if (c.base_current < 0) throw UsageError("base_current_ma must be non-negative");
    if (!(c.train_fraction > 0 && c.train_fraction < 1)) throw UsageError("train_fraction must lie in (0, 1)");
    return c;
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j, path.parent_path());
}

LoadedData load_and_split(const RunConfig& config) {
  if (config.manifest.empty()) throw UsageError("no manifest given");
  Manifest manifest = load_manifest(config.manifest);
  std::optional<PowerModel> aux;
  if (config.aux_model) aux = load_model(*config.aux_model);

  LoadOptions options;
  options.base_current = config.base_current;
  options.aux_model = aux ? &*aux : nullptr;
  options.frequency_as_counter = config.frequency_as_counter;
  LoadResult loaded = load_dataset(manifest, options);

  LoadedData out;
  out.all = std::move(loaded.dataset);
  out.isolation = loaded.isolation;
  out.train_idx = train_indices(out.all.size(), config.train_fraction, config.seed);
  std::vector<bool> in_train(out.all.size(), false);
  for (std::size_t i : out.train_idx) in_train[i] = true;
  for (std::size_t i = 0; i < out.all.size(); ++i) {
    if (!in_train[i]) out.test_idx.push_back(i);
  }
  return out;
}

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  LoadedData data = load_and_split(config);
  const Dataset train = data.train();
  const Dataset test = data.test();
  log << "loaded " << data.all.size() << " runs, " << data.all.counter_names.size() << " counters ("
      << train.size() << " train / " << test.size() << " test)\n";
  if (data.isolation.clamped > 0) log << "warning: " << data.isolation.clamped << " runs clamped to 0 mA after isolation\n";

  TrainOutcome outcome{fit_apgpm(train, config.train), {}, {}};
  PowerModel& model = outcome.fit.model;
  model.train_meta["run_config"] = config.to_json();

  const Predictions train_pred = predict(model, train);
  const Predictions test_pred = predict(model, test);
  outcome.train = evaluate(train_pred.values, train.targets());
  outcome.test = evaluate(test_pred.values, test.targets());

  std::filesystem::create_directories(config.output_dir);
  save_model(model, config.output_dir / "model.json");
  write_text(config.output_dir / "selection_trace.txt", format_trace(outcome.fit.selection, outcome.fit.matrix));
  write_text(config.output_dir / "dendrogram.json", dendrogram_json(outcome.fit.dendrogram));

  json report;
  report["mode"] = model.train_meta["mode"];
  report["n_features"] = model.features.size();
  report["n_clusters"] = outcome.fit.clusters.n_clusters;
  report["train"] = evaluation_json(train, train_pred.values);
  report["test"] = evaluation_json(test, test_pred.values);
  report["negative_predictions"] = {{"train", train_pred.negative}, {"test", test_pred.negative}};
  report["isolation_clamped"] = data.isolation.clamped;
  report["split"] = {{"seed", config.seed},
                     {"train_fraction", config.train_fraction},
                     {"train", names_of(train)},
                     {"test", names_of(test)}};
  write_text(config.output_dir / "report.json", report.dump(2) + "\n");

  std::string csv = "benchmark,split,workload_type,target_ma,predicted_ma\n";
  auto rows = [&](const Dataset& ds, const Predictions& p, const char* split) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& r = ds.records[i];
      csv += r.meta.benchmark_name + "," + split + "," + std::string(to_string(r.meta.workload_type)) + "," +
             fmt("%.17g", r.target_current) + "," + fmt("%.17g", p.values[i]) + "\n";
    }
  };
  rows(train, train_pred, "train");
  rows(test, test_pred, "test");
  write_text(config.output_dir / "predictions.csv", csv);

  log << "selected " << model.features.size() << " of " << outcome.fit.matrix.specs.size() << " candidate features in "
      << outcome.fit.clusters.n_clusters << " clusters\n";
  log << "train R2 " << fmt("%.6f", outcome.train.r_squared) << ", test R2 " << fmt("%.6f", outcome.test.r_squared)
      << ", test MAPE " << fmt("%.3f", outcome.test.mape_mean) << "% (median " << fmt("%.3f", outcome.test.mape_median)
      << "%)\n";
  return outcome;
}

json cmd_eval(const RunConfig& config, const std::filesystem::path& model_path, SplitChoice split) {
  if (!std::filesystem::exists(model_path)) throw IoError("model not found: " + model_path.string());
  const PowerModel model = load_model(model_path);
  LoadedData data = load_and_split(config);
  Dataset ds = split == SplitChoice::Train ? data.train() : split == SplitChoice::Test ? data.test() : data.all;
  const Predictions p = predict(model, ds);
  json out = evaluation_json(ds, p.values);
  out["negative_predictions"] = p.negative;
  return out;
}

std::string cmd_predict(const RunConfig& config, const std::filesystem::path& model_path) {
  if (!std::filesystem::exists(model_path)) throw IoError("model not found: " + model_path.string());
  const PowerModel model = load_model(model_path);
  LoadedData data = load_and_split(config);
  std::string csv = "benchmark,workload_type,target_ma,predicted_ma\n";
  for (const auto& r : data.all.records) {
    csv += r.meta.benchmark_name + "," + std::string(to_string(r.meta.workload_type)) + "," +
           fmt("%.17g", r.target_current) + "," + fmt("%.17g", predict(model, r)) + "\n";
  }
  return csv;
}

std::vector<CompareRow> cmd_compare(const RunConfig& config, std::ostream& log) {
  LoadedData data = load_and_split(config);
  const Dataset train = data.train();
  const Dataset test = data.test();
  const auto truth = test.targets();
  std::vector<CompareRow> rows;

  auto add = [&](const std::string& name, const PowerModel& model) {
    rows.push_back({name, model.features.size(), evaluate(predict(model, test).values, truth), {}});
  };

  const PowerModel apgpm = train_apgpm(train, config.train);
  add("APGPM", apgpm);
  TrainConfig linear_cfg = config.train;
  linear_cfg.combined = false;
  add("Linear APGPM", train_apgpm(train, linear_cfg));

  try {
    const UtilFreqModel uf = train_util_freq(train, {config.per_frequency_intercept});
    const std::size_t params = uf.slopes.size() + uf.intercept_offsets.size();
    rows.push_back({"util-freq", params, evaluate(uf.predict(test), truth), {}});
  } catch (const Error& e) {
    rows.push_back({"util-freq", 0, std::nullopt, e.what()});
  }

  const PowerModel all = train_all_pmc(train);
  add("All-PMC", all);
  const std::size_t k = std::min(config.k_top.value_or(apgpm.features.size()), all.features.size());
  add("k-top (k=" + std::to_string(k) + ")", train_k_top(train, k));

  json j = json::array();
  std::string csv = "model,n_features,r_squared,mae_mean,mae_median,mape_mean,mape_median\n";
  for (const auto& row : rows) {
    json entry{{"model", row.model}, {"n_features", row.n_features}};
    entry["test"] = row.test ? report_to_json(*row.test) : json(nullptr);
    if (!row.note.empty()) entry["note"] = row.note;
    j.push_back(std::move(entry));
    if (row.test) {
      csv += row.model + "," + std::to_string(row.n_features) + "," + fmt("%.17g", row.test->r_squared) + "," +
             fmt("%.17g", row.test->mae_mean) + "," + fmt("%.17g", row.test->mae_median) + "," +
             fmt("%.17g", row.test->mape_mean) + "," + fmt("%.17g", row.test->mape_median) + "\n";
    }
  }
  std::filesystem::create_directories(config.output_dir);
  write_text(config.output_dir / "compare.json", j.dump(2) + "\n");
  write_text(config.output_dir / "compare.csv", csv);
  log << format_compare_table(rows);
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %22s %22s\n", "model", "features", "R2", "MAE mA mean(median)",
                "MAPE % mean(median)");
  out += line;
  for (const auto& row : rows) {
    if (!row.test) {
      std::snprintf(line, sizeof line, "%-16s %8s  n/a: %s\n", row.model.c_str(), "-", row.note.c_str());
    } else {
      const std::string mae = fmt("%.2f", row.test->mae_mean) + " (" + fmt("%.2f", row.test->mae_median) + ")";
      const std::string mape = fmt("%.2f", row.test->mape_mean) + " (" + fmt("%.2f", row.test->mape_median) + ")";
      std::snprintf(line, sizeof line, "%-16s %8zu %8.4f %22s %22s\n", row.model.c_str(), row.n_features,
                    row.test->r_squared, mae.c_str(), mape.c_str());
    }
    out += line;
  }
  return out;
}

void cmd_synth(const std::string& profile_name, const std::optional<std::filesystem::path>& config_path,
               std::size_t n_runs, double noise_sigma, std::uint64_t seed, const std::filesystem::path& out_dir) {
  synth::SynthConfig cfg;
  if (config_path) {
    if (!std::filesystem::exists(*config_path)) throw IoError("synth config not found: " + config_path->string());
    try {
      cfg = synth::SynthConfig::from_json(json::parse(read_file(*config_path)));
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("synth config is not valid JSON: ") + e.what());
    }
  } else {
    cfg = synth::profile(profile_name, n_runs, noise_sigma, seed);
  }
  const auto generated = synth::generate(cfg);
  synth::write_dataset(generated, out_dir);
  write_text(out_dir / "synth_config.json", cfg.to_json().dump(2) + "\n");
}

double cmd_energy(double current_ma, double voltage_v, double latency_ms) {
  if (!(current_ma > 0) || !(voltage_v > 0) || !(latency_ms > 0)) {
    throw UsageError("current, voltage and latency must all be positive");
  }
  return current_ma * voltage_v * latency_ms / 1000.0;
}

}  // namespace apgpm
