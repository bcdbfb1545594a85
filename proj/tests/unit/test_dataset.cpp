#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "apgpm/dataset.hpp"
#include "apgpm/model.hpp"
#include "../oracles.hpp"

using namespace apgpm;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

PowerTrace constant_power(double start, double end, double ma) {
  PowerTrace p;
  p.samples = {{start, ma}, {end, ma}};
  return p;
}

RunMeta meta() {
  RunMeta m;
  m.benchmark_name = "b";
  m.frequency_hz = 701e6;
  return m;
}

Dataset numbered(std::size_t n) {
  std::vector<double> c(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = static_cast<double>(i);
    y[i] = static_cast<double>(i) * 2;
  }
  return testutil::make_dataset({{"c", c}}, y);
}

}  // namespace

TEST_CASE("counter trace: minimal input") {
  auto t = parse_counter_trace("ts_ms,c1,c2\n0,0,0\n1000,8,1\n");
  CHECK(t.counter_names == std::vector<std::string>{"c1", "c2"});
  REQUIRE(t.samples.size() == 2);
  CHECK(t.samples[1].ts_ms == 1000);
  CHECK(t.samples[1].counts == std::vector<double>{8, 1});
}

TEST_CASE("counter trace: errors name the line") {
  CHECK(error_of([] { parse_counter_trace("ts_ms,c1\n1000,1\n500,2\n"); }).find("non-monotone timestamp at line 3") !=
        std::string::npos);
  CHECK(error_of([] { parse_counter_trace("ts_ms,c1,c2\n0,1,2\n1000,1\n"); }).find("column mismatch at line 3") !=
        std::string::npos);
  CHECK(error_of([] { parse_counter_trace("ts_ms,c1\n0,abc\n"); }).find("line 2") != std::string::npos);
  CHECK_THROWS_AS(parse_counter_trace("ts_ms,c1\n0,-1\n"), ParseError);
  CHECK_THROWS_AS(parse_counter_trace("ts_ms,a*b\n0,1\n"), ParseError);
  CHECK_THROWS_AS(parse_counter_trace("ts_ms,a,a\n0,1,1\n"), ParseError);
  CHECK_THROWS_AS(parse_counter_trace(""), ParseError);
}

TEST_CASE("power trace: parsing and validation") {
  auto p = parse_power_trace("ts_ms,current_ma,voltage_v\n0,100,3.86\n50,120,3.86\n");
  REQUIRE(p.samples.size() == 2);
  CHECK(p.voltage_v == doctest::Approx(3.86));
  CHECK_THROWS_AS(parse_power_trace("ts_ms,current_ma\n0,-5\n"), ParseError);
  CHECK_THROWS_AS(parse_power_trace("ts_ms,current_ma\n10,1\n10,2\n"), ParseError);
  CHECK_THROWS_AS(parse_power_trace("ts,current\n0,1\n"), ParseError);
}

TEST_CASE("aggregate_run: rates and time-weighted current") {
  SUBCASE("600 events over 2 s") {
    auto c = parse_counter_trace("ts_ms,c1\n0,0\n2000,600\n");
    auto r = aggregate_run(c, constant_power(0, 2000, 150), meta());
    CHECK(r.rates.at("c1") == doctest::Approx(300));
    CHECK(r.total_current == doctest::Approx(150));
    CHECK(r.target_current == r.total_current);
  }
  SUBCASE("100 mA for 1 s then 200 mA for 3 s") {
    auto c = parse_counter_trace("ts_ms,c1\n0,0\n4000,4\n");
    PowerTrace p;
    p.samples = {{0, 100}, {1000, 200}, {4000, 200}};
    auto r = aggregate_run(c, p, meta());
    CHECK(r.total_current == doctest::Approx(175));
    CHECK(r.total_current == doctest::Approx(oracle::hold_average({{0, 100}, {1000, 200}, {4000, 200}}, 0, 4000)));
  }
  SUBCASE("irregular power sampling against the hold oracle") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> step(10, 90), amp(50, 900);
    PowerTrace p;
    std::vector<std::pair<double, double>> raw;
    for (double t = 0; t < 6000; t += step(rng)) {
      const double a = amp(rng);
      p.samples.push_back({t, a});
      raw.emplace_back(t, a);
    }
    auto c = parse_counter_trace("ts_ms,c1\n500,0\n5500,10\n");
    auto r = aggregate_run(c, p, meta());
    CHECK(r.total_current == doctest::Approx(oracle::hold_average(raw, 500, 5500)).epsilon(1e-12));
  }
  SUBCASE("intervals straddling the window edge are prorated") {
    auto c = parse_counter_trace("ts_ms,c1\n0,0\n2000,400\n3000,100\n");
    auto r = aggregate_run(c, constant_power(1000, 3000, 10), meta());
    CHECK(r.rates.at("c1") == doctest::Approx(150));
  }
  SUBCASE("window errors") {
    auto c = parse_counter_trace("ts_ms,c1\n0,0\n2000,1\n");
    CHECK(error_of([&] { aggregate_run(c, constant_power(3000, 5000, 1), meta()); }) == "no temporal overlap");
    CHECK(error_of([&] { aggregate_run(c, constant_power(1500, 5000, 1), meta()); }).find("shorter than 1 s") !=
          std::string::npos);
    RunMeta bad = meta();
    bad.frequency_hz = 0;
    CHECK_THROWS(aggregate_run(c, constant_power(0, 2000, 1), bad));
    bad = meta();
    bad.utilization = 1.5;
    CHECK_THROWS(aggregate_run(c, constant_power(0, 2000, 1), bad));
  }
}

TEST_CASE("aggregate_run: splitting a sample leaves rates unchanged") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    CounterTrace a;
    a.counter_names = {"x", "y"};
    double t = 0;
    a.samples.push_back({t, {0, 0}});
    for (int i = 0; i < 8; ++i) {
      t += 100 + 400 * u(rng);
      a.samples.push_back({t, {1000 * u(rng), 50 * u(rng)}});
    }
    const std::size_t k = 1 + static_cast<std::size_t>(u(rng) * 8) % 8;
    CounterTrace b = a;
    const double mid = (a.samples[k - 1].ts_ms + a.samples[k].ts_ms) / 2;
    const double frac = u(rng);
    CounterSample first{mid, {a.samples[k].counts[0] * frac, a.samples[k].counts[1] * frac}};
    b.samples[k].counts = {a.samples[k].counts[0] * (1 - frac), a.samples[k].counts[1] * (1 - frac)};
    b.samples.insert(b.samples.begin() + static_cast<std::ptrdiff_t>(k), first);
    const auto p = constant_power(0, t, 100);
    auto ra = aggregate_run(a, p, meta());
    auto rb = aggregate_run(b, p, meta());
    for (const auto& name : a.counter_names) {
      CHECK(rb.rates.at(name) == doctest::Approx(ra.rates.at(name)).epsilon(1e-12));
    }
  }
}

TEST_CASE("isolate_power") {
  RunRecord r;
  r.total_current = 500;
  r.target_current = 500;
  CHECK(isolate_power(r, 100).target_current == 400);

  PowerModel aux;
  aux.features = {FeatureSpec::base("cpu_cycles")};
  aux.coefficients = {1.5};
  aux.intercept = 0;
  RateMap cpu{{"cpu_cycles", 100}};
  CHECK(isolate_power(r, 100, &aux, &cpu).target_current == doctest::Approx(250));

  RunRecord low;
  low.total_current = 90;
  IsolationStats stats;
  CHECK(isolate_power(low, 100, nullptr, nullptr, &stats).target_current == 0);
  CHECK(stats.clamped == 1);

  RateMap empty;
  CHECK(error_of([&] { isolate_power(r, 100, &aux, &empty); }).find("base:cpu_cycles") != std::string::npos);
  CHECK_THROWS(isolate_power(r, -1));
}

TEST_CASE("isolate_power never yields negative targets") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1000);
  for (int i = 0; i < 200; ++i) {
    RunRecord r;
    r.total_current = u(rng);
    auto out = isolate_power(r, u(rng));
    CHECK(out.target_current >= 0);
    CHECK(out.target_current <= out.total_current);
  }
}

TEST_CASE("split_dataset") {
  auto nine = numbered(9);
  auto [train, test] = split_dataset(nine, 2.0 / 3.0, 7);
  CHECK(train.size() == 6);
  CHECK(test.size() == 3);

  auto [train2, test2] = split_dataset(nine, 2.0 / 3.0, 7);
  CHECK(fingerprint(train) == fingerprint(train2));
  CHECK(fingerprint(test) == fingerprint(test2));

  std::set<std::string> names;
  for (const auto& r : train.records) names.insert(r.meta.benchmark_name);
  for (const auto& r : test.records) CHECK(names.insert(r.meta.benchmark_name).second);
  CHECK(names.size() == 9);

  auto [a, b] = split_dataset(numbered(300), 2.0 / 3.0, 1);
  CHECK(a.size() == 200);
  CHECK(b.size() == 100);

  CHECK(train_indices(300, 2.0 / 3.0, 1) != train_indices(300, 2.0 / 3.0, 2));
  CHECK_THROWS(split_dataset(numbered(2), 0.5, 1));
  CHECK_THROWS(split_dataset(nine, 1.0, 1));
  CHECK_THROWS(split_dataset(nine, 0.0, 1));
}

TEST_CASE("workload type names round-trip") {
  for (auto t : {WorkloadType::Rendering, WorkloadType::NeuralNetwork, WorkloadType::Compute, WorkloadType::Other}) {
    CHECK(parse_workload_type(to_string(t)) == t);
  }
  CHECK_THROWS_AS(parse_workload_type("Gaming"), ParseError);
}

TEST_CASE("manifest loading") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "apgpm_manifest_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) { std::ofstream(dir / name) << text; };
  write("a_c.csv", "ts_ms,c1\n0,0\n2000,600\n");
  write("a_p.csv", "ts_ms,current_ma\n0,150\n2000,150\n");
  write("a_aux.csv", "ts_ms,cpu\n0,0\n2000,200\n");
  write("manifest.json", R"({"runs":[{"counter_file":"a_c.csv","power_file":"a_p.csv","aux_counter_file":"a_aux.csv",
    "benchmark":"a","workload_type":"Compute","frequency_hz":251e6,"utilization":0.4}]})");

  auto manifest = load_manifest(dir / "manifest.json");
  REQUIRE(manifest.runs.size() == 1);
  CHECK(manifest.runs[0].meta.workload_type == WorkloadType::Compute);

  LoadOptions opts;
  opts.base_current = 50;
  auto loaded = load_dataset(manifest, opts);
  CHECK(loaded.dataset.counter_names == std::vector<std::string>{"c1", kFrequencyCounter});
  CHECK(loaded.dataset.records[0].rates.at(kFrequencyCounter) == 251e6);
  CHECK(loaded.dataset.records[0].target_current == doctest::Approx(100));

  PowerModel aux;
  aux.features = {FeatureSpec::base("cpu")};
  aux.coefficients = {0.5};
  opts.aux_model = &aux;
  opts.frequency_as_counter = false;
  loaded = load_dataset(manifest, opts);
  CHECK(loaded.dataset.counter_names == std::vector<std::string>{"c1"});
  CHECK(loaded.dataset.records[0].target_current == doctest::Approx(150 - 50 - 0.5 * 100));

  CHECK_THROWS_AS(load_manifest(dir / "missing.json"), IoError);
  CHECK(error_of([&] { load_manifest(dir / "missing.json"); }).find("manifest not found") != std::string::npos);
  CHECK_THROWS_AS(parse_manifest("{", dir), ParseError);
  CHECK_THROWS_AS(parse_manifest(R"({"runs":[{"power_file":"x"}]})", dir), ParseError);
  fs::remove_all(dir);
}
