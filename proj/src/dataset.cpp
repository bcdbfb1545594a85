#include "apgpm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "apgpm/model.hpp"

namespace apgpm {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::string at_line(std::size_t line) { return " at line " + std::to_string(line); }

double parse_number(std::string_view field, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError("malformed number '" + std::string(field) + "'" + at_line(line));
  }
  return value;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> lines_of(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty()) out.emplace_back(number, line);
    start = end + 1;
  }
  return out;
}

// Time-weighted mean of a sample-and-hold signal over [lo, hi].
double hold_mean(const std::vector<PowerSample>& samples, double lo, double hi) {
  std::vector<double> pieces;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    double a = std::max(samples[i].ts_ms, lo);
    double b = std::min(samples[i + 1].ts_ms, hi);
    if (b > a) pieces.push_back(samples[i].current_ma * (b - a));
  }
  return pairwise_sum(pieces) / (hi - lo);
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  h = fnv1a(h, s.data(), s.size());
  const char sep = '\0';
  return fnv1a(h, &sep, 1);
}

std::uint64_t fnv1a(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return fnv1a(h, &bits, sizeof bits);
}

// Unbiased integer in [0, bound) from a 64-bit engine.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % bound;
}

}  // namespace

std::string_view to_string(WorkloadType type) {
  switch (type) {
    case WorkloadType::Rendering: return "Rendering";
    case WorkloadType::NeuralNetwork: return "NeuralNetwork";
    case WorkloadType::Compute: return "Compute";
    case WorkloadType::Other: return "Other";
  }
  return "Other";
}

WorkloadType parse_workload_type(std::string_view text) {
  if (text == "Rendering") return WorkloadType::Rendering;
  if (text == "NeuralNetwork") return WorkloadType::NeuralNetwork;
  if (text == "Compute") return WorkloadType::Compute;
  if (text == "Other") return WorkloadType::Other;
  throw ParseError("unknown workload type '" + std::string(text) + "'");
}

std::vector<double> Dataset::column(const std::string& counter) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto it = r.rates.find(counter);
    if (it == r.rates.end()) throw Error("missing counter " + counter);
    out.push_back(it->second);
  }
  return out;
}

std::vector<double> Dataset::targets() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.target_current);
  return out;
}

CounterTrace parse_counter_trace(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("empty counter trace");
  auto header = split_csv(lines.front().second);
  if (header.size() < 2 || header.front() != "ts_ms") {
    throw ParseError("counter trace header must be 'ts_ms,<counter>...'" + at_line(lines.front().first));
  }
  CounterTrace trace;
  for (std::size_t i = 1; i < header.size(); ++i) {
    std::string_view name = header[i];
    if (name.empty() || name.find_first_of("*/") != std::string_view::npos) {
      throw ParseError("invalid counter name '" + std::string(name) + "'" + at_line(lines.front().first));
    }
    if (std::find(trace.counter_names.begin(), trace.counter_names.end(), name) != trace.counter_names.end()) {
      throw ParseError("duplicate counter '" + std::string(name) + "'" + at_line(lines.front().first));
    }
    trace.counter_names.emplace_back(name);
  }
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto [number, line] = lines[li];
    auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw ParseError("column mismatch" + at_line(number) + ": expected " + std::to_string(header.size()) +
                       " values, got " + std::to_string(fields.size()));
    }
    CounterSample sample;
    sample.ts_ms = parse_number(fields[0], number);
    if (!trace.samples.empty() && sample.ts_ms <= trace.samples.back().ts_ms) {
      throw ParseError("non-monotone timestamp" + at_line(number));
    }
    sample.counts.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double count = parse_number(fields[i], number);
      if (count < 0) throw ParseError("negative count" + at_line(number));
      sample.counts.push_back(count);
    }
    trace.samples.push_back(std::move(sample));
  }
  return trace;
}

PowerTrace parse_power_trace(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("empty power trace");
  auto header = split_csv(lines.front().second);
  bool with_voltage = header.size() == 3 && header[2] == "voltage_v";
  if (header.size() < 2 || header[0] != "ts_ms" || header[1] != "current_ma" ||
      (header.size() == 3 && !with_voltage) || header.size() > 3) {
    throw ParseError("power trace header must be 'ts_ms,current_ma[,voltage_v]'" + at_line(lines.front().first));
  }
  PowerTrace trace;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto [number, line] = lines[li];
    auto fields = split_csv(line);
    if (fields.size() != header.size()) throw ParseError("column mismatch" + at_line(number));
    PowerSample sample{parse_number(fields[0], number), parse_number(fields[1], number)};
    if (!trace.samples.empty() && sample.ts_ms <= trace.samples.back().ts_ms) {
      throw ParseError("non-monotone timestamp" + at_line(number));
    }
    if (sample.current_ma < 0) throw ParseError("negative current" + at_line(number));
    if (with_voltage) trace.voltage_v = parse_number(fields[2], number);
    trace.samples.push_back(sample);
  }
  return trace;
}

RunRecord aggregate_run(const CounterTrace& counters, const PowerTrace& power, RunMeta meta) {
  if (meta.frequency_hz <= 0) throw Error("frequency must be positive for run '" + meta.benchmark_name + "'");
  if (meta.utilization && (*meta.utilization < 0 || *meta.utilization > 1)) {
    throw Error("utilization outside [0,1] for run '" + meta.benchmark_name + "'");
  }
  if (counters.samples.size() < 2 || power.samples.size() < 2) throw Error("no temporal overlap");
  const double lo = std::max(counters.samples.front().ts_ms, power.samples.front().ts_ms);
  const double hi = std::min(counters.samples.back().ts_ms, power.samples.back().ts_ms);
  if (hi <= lo) throw Error("no temporal overlap");
  if (hi - lo < 1000.0) throw Error("temporal overlap shorter than 1 s");
  const double seconds = (hi - lo) / 1000.0;

  RunRecord record;
  record.meta = std::move(meta);
  const std::size_t n_counters = counters.counter_names.size();
  std::vector<std::vector<double>> pieces(n_counters);
  for (std::size_t s = 1; s < counters.samples.size(); ++s) {
    const double a = counters.samples[s - 1].ts_ms;
    const double b = counters.samples[s].ts_ms;
    const double inside = std::min(b, hi) - std::max(a, lo);
    if (inside <= 0) continue;
    const bool whole = a >= lo && b <= hi;
    const double fraction = inside / (b - a);
    for (std::size_t c = 0; c < n_counters; ++c) {
      const double count = counters.samples[s].counts[c];
      pieces[c].push_back(whole ? count : count * fraction);
    }
  }
  for (std::size_t c = 0; c < n_counters; ++c) {
    record.rates[counters.counter_names[c]] = pairwise_sum(pieces[c]) / seconds;
  }
  record.total_current = hold_mean(power.samples, lo, hi);
  record.target_current = record.total_current;
  return record;
}

RunRecord isolate_power(const RunRecord& record, double base_current, const PowerModel* aux_model,
                        const RateMap* aux_rates, IsolationStats* stats) {
  if (base_current < 0) throw Error("base current must be non-negative");
  double aux = 0.0;
  if (aux_model) {
    if (!aux_rates) throw Error("auxiliary model given without auxiliary rates");
    for (const auto& spec : aux_model->features) {
      for (const auto& counter : spec.counters()) {
        if (!aux_rates->contains(counter)) {
          throw Error("missing auxiliary rate for feature " + spec.canonical() + " (counter " + counter + ")");
        }
      }
    }
    aux = predict(*aux_model, *aux_rates);
  }
  RunRecord out = record;
  out.target_current = record.total_current - base_current - aux;
  if (out.target_current < 0) {
    out.target_current = 0;
    if (stats) ++stats->clamped;
  }
  return out;
}

std::vector<std::size_t> train_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw Error("train fraction must lie in (0, 1)");
  if (n < 3) throw Error("too few records to split (need at least 3)");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[bounded(rng, i + 1)]);
  }
  // Guard against 2/3 * 9 landing a hair above 6.
  auto n_train = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * train_fraction - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  order.resize(n_train);
  return order;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.counter_names = ds.counter_names;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(ds.records.at(i));
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  auto train = train_indices(ds.size(), train_fraction, seed);
  std::vector<bool> in_train(ds.size(), false);
  for (std::size_t i : train) in_train[i] = true;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!in_train[i]) test.push_back(i);
  }
  return {subset(ds, train), subset(ds, test)};
}

std::uint64_t fingerprint(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& name : ds.counter_names) h = fnv1a(h, name);
  for (const auto& r : ds.records) {
    h = fnv1a(h, r.meta.benchmark_name);
    h = fnv1a(h, to_string(r.meta.workload_type));
    h = fnv1a(h, r.meta.frequency_hz);
    h = fnv1a(h, r.meta.utilization.value_or(-1.0));
    for (const auto& name : ds.counter_names) h = fnv1a(h, r.rates.at(name));
    h = fnv1a(h, r.total_current);
    h = fnv1a(h, r.target_current);
  }
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("runs") || !j["runs"].is_array()) {
    throw ParseError("manifest must be an object with a 'runs' array");
  }
  Manifest manifest;
  std::size_t index = 0;
  for (const auto& run : j["runs"]) {
    try {
      ManifestRun entry;
      entry.counter_file = base_dir / run.at("counter_file").get<std::string>();
      entry.power_file = base_dir / run.at("power_file").get<std::string>();
      if (run.contains("aux_counter_file")) {
        entry.aux_counter_file = base_dir / run["aux_counter_file"].get<std::string>();
      }
      entry.meta.benchmark_name = run.at("benchmark").get<std::string>();
      entry.meta.workload_type = parse_workload_type(run.value("workload_type", std::string("Other")));
      entry.meta.frequency_hz = run.at("frequency_hz").get<double>();
      if (run.contains("utilization") && !run["utilization"].is_null()) {
        entry.meta.utilization = run["utilization"].get<double>();
      }
      manifest.runs.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest run " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("manifest not found: " + path.string());
  return parse_manifest(read_file(path), path.parent_path());
}

LoadResult load_dataset(const Manifest& manifest, const LoadOptions& options) {
  LoadResult result;
  Dataset& ds = result.dataset;
  for (const auto& run : manifest.runs) {
    auto wrap = [&](const std::filesystem::path& file, auto&& parse) {
      try {
        return parse(read_file(file));
      } catch (const ParseError& e) {
        throw ParseError(file.string() + ": " + e.what());
      }
    };
    auto counters = wrap(run.counter_file, parse_counter_trace);
    auto power = wrap(run.power_file, parse_power_trace);
    RunRecord record = aggregate_run(counters, power, run.meta);
    if (options.frequency_as_counter) record.rates[kFrequencyCounter] = run.meta.frequency_hz;

    std::vector<std::string> names = counters.counter_names;
    if (options.frequency_as_counter) names.emplace_back(kFrequencyCounter);
    if (ds.records.empty()) {
      ds.counter_names = names;
    } else if (names != ds.counter_names) {
      throw Error("run '" + run.meta.benchmark_name + "' has a different counter set or order");
    }

    if (options.aux_model) {
      if (!run.aux_counter_file) {
        throw Error("run '" + run.meta.benchmark_name + "' has no aux_counter_file for the auxiliary model");
      }
      auto aux_counters = wrap(*run.aux_counter_file, parse_counter_trace);
      RunRecord aux = aggregate_run(aux_counters, power, run.meta);
      record = isolate_power(record, options.base_current, options.aux_model, &aux.rates, &result.isolation);
    } else {
      record = isolate_power(record, options.base_current, nullptr, nullptr, &result.isolation);
    }
    ds.records.push_back(std::move(record));
  }
  return result;
}

}  // namespace apgpm
