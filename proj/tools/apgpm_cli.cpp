// apgpm: train, evaluate and compare counter-based power models.
//
// Exit codes: 0 success, 1 pipeline error, 2 usage or I/O error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "apgpm/commands.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string manifest;
  std::string out;
  std::string aux_model;
  std::optional<double> base_current;
  std::optional<std::uint64_t> seed;
  std::optional<double> train_fraction;
  bool no_combined = false;
  bool no_frequency_counter = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "JSON run config");
    cmd->add_option("-m,--manifest", manifest, "run manifest (overrides config)");
    cmd->add_option("-o,--out", out, "output directory (overrides config)");
    cmd->add_option("--aux-model", aux_model, "model whose prediction is subtracted from each run");
    cmd->add_option("--base-current", base_current, "static base current in mA");
    cmd->add_option("--seed", seed, "split seed");
    cmd->add_option("--train-fraction", train_fraction, "fraction of runs used for training");
    cmd->add_flag("--no-combined", no_combined, "Linear APGPM: base counters only");
    cmd->add_flag("--no-frequency-counter", no_frequency_counter, "do not expose frequency as a candidate counter");
  }

  apgpm::RunConfig resolve() const {
    apgpm::RunConfig rc = config.empty() ? apgpm::RunConfig{} : apgpm::RunConfig::load(config);
    if (!manifest.empty()) rc.manifest = manifest;
    if (!out.empty()) rc.output_dir = out;
    if (!aux_model.empty()) rc.aux_model = aux_model;
    if (base_current) {
      if (*base_current < 0) throw apgpm::UsageError("--base-current must be non-negative");
      rc.base_current = *base_current;
    }
    if (seed) rc.seed = *seed;
    if (train_fraction) rc.train_fraction = *train_fraction;
    if (no_combined) rc.train.combined = false;
    if (no_frequency_counter) rc.frequency_as_counter = false;
    return rc;
  }
};

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw apgpm::IoError("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automated counter-based power model synthesis"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  auto* train = app.add_subcommand("train", "fit an APGPM model and write model, trace and reports");
  train_opts.attach(train);

  CommonOptions eval_opts;
  std::string eval_model, eval_split = "all", eval_file;
  auto* eval = app.add_subcommand("eval", "evaluate a saved model on a manifest");
  eval_opts.attach(eval);
  eval->add_option("--model", eval_model, "model file")->required();
  eval->add_option("--split", eval_split, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
  eval->add_option("--report", eval_file, "write the JSON report here instead of stdout");

  CommonOptions predict_opts;
  std::string predict_model, predict_file;
  auto* pred = app.add_subcommand("predict", "predict current for every run of a manifest");
  predict_opts.attach(pred);
  pred->add_option("--model", predict_model, "model file")->required();
  pred->add_option("--csv", predict_file, "write CSV here instead of stdout");

  CommonOptions compare_opts;
  std::optional<std::size_t> compare_k;
  auto* compare = app.add_subcommand("compare", "compare APGPM against the baselines");
  compare_opts.attach(compare);
  compare->add_option("-k,--k-top", compare_k, "k for the k-top baseline (default: APGPM feature count)");

  std::string synth_profile = "three-factor", synth_config, synth_out;
  std::size_t synth_runs = 120;
  double synth_noise = 0.0;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with known ground truth");
  synth->add_option("--profile", synth_profile, "three-factor, collinear or instruction-mix");
  synth->add_option("--synth-config", synth_config, "JSON synth config (overrides --profile)");
  synth->add_option("--runs", synth_runs, "number of runs");
  synth->add_option("--noise", synth_noise, "relative Gaussian noise on current");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("-o,--out", synth_out, "output directory")->required();

  double e_current = 0, e_voltage = 0, e_latency = 0;
  auto* energy = app.add_subcommand("energy", "energy per inference in mWs");
  energy->add_option("--current", e_current, "current in mA")->required();
  energy->add_option("--voltage", e_voltage, "supply voltage in V")->required();
  energy->add_option("--latency", e_latency, "inference latency in ms")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      apgpm::cmd_train(train_opts.resolve(), std::cerr);
    } else if (*eval) {
      const auto split = eval_split == "train" ? apgpm::SplitChoice::Train
                         : eval_split == "test" ? apgpm::SplitChoice::Test
                                                : apgpm::SplitChoice::All;
      emit(apgpm::cmd_eval(eval_opts.resolve(), eval_model, split).dump(2) + "\n", eval_file);
    } else if (*pred) {
      emit(apgpm::cmd_predict(predict_opts.resolve(), predict_model), predict_file);
    } else if (*compare) {
      auto rc = compare_opts.resolve();
      if (compare_k) rc.k_top = *compare_k;
      apgpm::cmd_compare(rc, std::cout);
    } else if (*synth) {
      std::optional<std::filesystem::path> cfg;
      if (!synth_config.empty()) cfg = synth_config;
      apgpm::cmd_synth(synth_profile, cfg, synth_runs, synth_noise, synth_seed, synth_out);
    } else if (*energy) {
      std::printf("%.2f mWs\n", apgpm::cmd_energy(e_current, e_voltage, e_latency));
    }
  } catch (const apgpm::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const apgpm::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
