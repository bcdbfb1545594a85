#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "apgpm/model.hpp"
#include "apgpm/synth.hpp"
#include "../oracles.hpp"

using namespace apgpm;

namespace {

Dataset util_freq_dataset(const std::map<double, double>& slopes, double intercept, std::size_t per_level) {
  Dataset ds;
  ds.counter_names = {"dummy"};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (const auto& [freq, slope] : slopes) {
    for (std::size_t i = 0; i < per_level; ++i) {
      RunRecord r;
      r.meta.benchmark_name = "r" + std::to_string(ds.size());
      r.meta.frequency_hz = freq;
      r.meta.utilization = u(rng);
      r.rates["dummy"] = u(rng);
      r.total_current = r.target_current = slope * *r.meta.utilization + intercept;
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("predict") {
  PowerModel m;
  m.features = {FeatureSpec::base("c1")};
  m.coefficients = {2};
  m.intercept = 10;
  CHECK(predict(m, RateMap{{"c1", 50}}) == 110);
  CHECK_THROWS_WITH(predict(m, RateMap{{"c2", 1}}), "missing counter c1");

  m.intercept = -500;
  auto ds = testutil::make_dataset({{"c1", {1, 2, 3}}}, {1, 1, 1});
  auto p = predict(m, ds);
  CHECK(p.negative == 3);
  CHECK(p.values[0] == -498);
}

TEST_CASE("APGPM on the noiseless three-factor synthetic") {
  auto gen = synth::generate(synth::three_factor_profile(120, 0.0, 1));
  auto [train, test] = split_dataset(gen.dataset, 2.0 / 3.0, 7);
  TrainConfig linear;
  linear.combined = false;
  auto fit = fit_apgpm(train, linear);
  CHECK(fit.model.features.size() == 3);
  CHECK(fit.model.train_meta["train_r2"].get<double>() >= 0.999);
  CHECK(fit.model.train_meta["mode"] == "Linear APGPM");
  CHECK(fit.model.features.size() <= fit.clusters.n_clusters);

  auto report = synth::verify_recovery(fit.selection, fit.matrix, fit.model, gen.truth);
  CHECK(report.clusters_single_factor);
  CHECK(report.clusters_distinct_factors);
  REQUIRE(report.coefficient_error.has_value());
  CHECK(*report.coefficient_error < 1e-6);

  // exact fit: predictions reproduce training targets
  for (const auto& r : train.records) CHECK(predict(fit.model, r) == doctest::Approx(r.target_current).epsilon(1e-6));

  auto all = train_all_pmc(train);
  CHECK(all.features.size() == 9);
  CHECK(all.train_meta["train_r2"].get<double>() >= fit.model.train_meta["train_r2"].get<double>() - 1e-12);
  CHECK(evaluate(predict(all, test).values, test.targets()).r_squared >= 0.999);

  auto combined = fit_apgpm(train, TrainConfig{});
  CHECK(combined.model.train_meta["mode"] == "APGPM");
  CHECK(combined.model.features.size() <= combined.clusters.n_clusters);
  CHECK(evaluate(predict(combined.model, test).values, test.targets()).r_squared >= 0.999);
}

TEST_CASE("k-top baseline") {
  auto gen = synth::generate(synth::three_factor_profile(60, 0.0, 2));
  auto& ds = gen.dataset;
  auto all = train_all_pmc(ds);
  auto k_all = train_k_top(ds, 9);
  for (const auto& r : ds.records) CHECK(predict(k_all, r) == doctest::Approx(predict(all, r)).epsilon(1e-9));

  auto one = train_k_top(ds, 1);
  REQUIRE(one.features.size() == 1);
  double best = -1;
  std::string best_name;
  for (const auto& name : ds.counter_names) {
    const double r = std::fabs(oracle::pearson(ds.column(name), ds.targets()));
    if (r > best + 1e-12) {
      best = r;
      best_name = name;
    }
  }
  CHECK(std::fabs(oracle::pearson(ds.column(one.features[0].first()), ds.targets())) == doctest::Approx(best));

  // k below the number of factors cannot reach an exact fit
  auto two = train_k_top(ds, 2);
  CHECK(evaluate(predict(two, ds).values, ds.targets()).r_squared < 0.999);

  CHECK_THROWS(train_k_top(ds, 0));
  CHECK_THROWS(train_k_top(ds, 10));
}

TEST_CASE("All-PMC is unaffected by duplicated counters") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<double> a(20), b(20), y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
    y[i] = 3 * a[i] - b[i] + u(rng);
  }
  auto plain = train_all_pmc(testutil::make_dataset({{"a", a}, {"b", b}}, y));
  auto dup_ds = testutil::make_dataset({{"a", a}, {"a2", a}, {"b", b}}, y);
  auto dup = train_all_pmc(dup_ds);
  CHECK(dup.features.size() == 3);
  for (const auto& r : dup_ds.records) CHECK(predict(dup, r) == doctest::Approx(predict(plain, r)).epsilon(1e-9));
}

TEST_CASE("utilization-frequency baseline") {
  auto ds = util_freq_dataset({{251e6, 100}, {471e6, 200}, {701e6, 300}}, 50, 8);
  auto m = train_util_freq(ds);
  CHECK(m.slopes.at(251e6) == doctest::Approx(100).epsilon(1e-8));
  CHECK(m.slopes.at(471e6) == doctest::Approx(200).epsilon(1e-8));
  CHECK(m.slopes.at(701e6) == doctest::Approx(300).epsilon(1e-8));
  CHECK(m.intercept == doctest::Approx(50).epsilon(1e-8));

  auto single = util_freq_dataset({{701e6, 120}}, 30, 6);
  auto s = train_util_freq(single);
  CHECK(s.slopes.size() == 1);
  CHECK(s.slopes.at(701e6) == doctest::Approx(120));
  CHECK(s.intercept == doctest::Approx(30));

  auto per = train_util_freq(ds, {true});
  CHECK(per.intercept_offsets.size() == 3);
  CHECK(per.predict(ds.records[0].meta) == doctest::Approx(ds.records[0].target_current));

  auto missing = ds;
  missing.records[0].meta.utilization.reset();
  CHECK_THROWS_WITH(train_util_freq(missing), doctest::Contains("missing utilization"));
  auto lonely = util_freq_dataset({{251e6, 100}, {701e6, 300}}, 50, 3);
  lonely.records.erase(lonely.records.begin(), lonely.records.begin() + 2);
  CHECK_THROWS(train_util_freq(lonely));

  RunMeta unknown;
  unknown.frequency_hz = 5;
  unknown.utilization = 0.5;
  CHECK_THROWS(m.predict(unknown));
}

TEST_CASE("util-freq cannot separate instruction mixes") {
  auto gen = synth::generate(synth::instruction_mix_profile(90, 0.0, 4));
  auto uf = train_util_freq(gen.dataset);
  auto r = evaluate(uf.predict(gen.dataset), gen.dataset.targets());
  CHECK(r.mape_mean > 10);
}

TEST_CASE("model serialization") {
  PowerModel m;
  m.features = {FeatureSpec::base("a"), FeatureSpec::inverted("b"), FeatureSpec::product("c", "d"),
                FeatureSpec::ratio("e", "f")};
  m.coefficients = {0.1, -1.0 / 3.0, 1e-17, 12345.678901234567};
  m.intercept = 42.125;
  m.train_meta["note"] = "x";
  auto back = deserialize_model(serialize_model(m));
  CHECK(back.features == m.features);
  CHECK(back.coefficients == m.coefficients);
  CHECK(back.intercept == m.intercept);
  CHECK(back.train_meta == m.train_meta);
  CHECK(serialize_model(back) == serialize_model(m));

  auto j = model_to_json(m);
  j["version"] = 99;
  CHECK_THROWS_WITH(model_from_json(j), doctest::Contains("schema version mismatch"));
  CHECK_THROWS_AS(deserialize_model("{\"version\": 1, \"feat"), ParseError);
  j = model_to_json(m);
  j["features"][0] = "sqrt:a";
  CHECK_THROWS_WITH(model_from_json(j), doctest::Contains("unknown feature-spec kind 'sqrt'"));
  j = model_to_json(m);
  j["coefficients"].erase(0);
  CHECK_THROWS_AS(model_from_json(j), ParseError);

  const auto path = std::filesystem::temp_directory_path() / "apgpm_model_roundtrip.json";
  save_model(m, path);
  CHECK(serialize_model(load_model(path)) == serialize_model(m));
  std::filesystem::remove(path);
}

TEST_CASE("training preconditions and determinism") {
  auto small = synth::generate(synth::three_factor_profile(9, 0.0, 1));
  CHECK_THROWS(train_apgpm(small.dataset, {}));

  auto gen = synth::generate(synth::collinear_profile(60, 0.05, 3));
  auto a = serialize_model(train_apgpm(gen.dataset, {}));
  auto b = serialize_model(train_apgpm(gen.dataset, {}));
  CHECK(a == b);
}

TEST_CASE("evaluation report breaks down by workload") {
  auto gen = synth::generate(synth::three_factor_profile(30, 0.0, 1));
  std::vector<double> pred = gen.dataset.targets();
  auto j = evaluation_json(gen.dataset, pred);
  CHECK(j["overall"]["mape_mean"] == 0.0);
  CHECK(j["by_workload"].contains("Compute"));
  CHECK(j["by_workload"].contains("Rendering"));
  CHECK(j["by_workload"].contains("NeuralNetwork"));
}
