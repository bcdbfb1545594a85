#include "apgpm/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace apgpm {

FeatureSpec FeatureSpec::base(std::string name) { return {FeatureKind::Base, std::move(name), {}}; }

FeatureSpec FeatureSpec::inverted(std::string name) { return {FeatureKind::Inverted, std::move(name), {}}; }

FeatureSpec FeatureSpec::product(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {FeatureKind::Product, std::move(a), std::move(b)};
}

FeatureSpec FeatureSpec::ratio(std::string numerator, std::string denominator) {
  return {FeatureKind::Ratio, std::move(numerator), std::move(denominator)};
}

FeatureSpec FeatureSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ParseError("feature spec '" + std::string(text) + "' has no kind prefix");
  const std::string_view kind = text.substr(0, colon);
  const std::string_view body = text.substr(colon + 1);
  auto require_name = [&](std::string_view name) {
    if (name.empty() || name.find_first_of("*/") != std::string_view::npos) {
      throw ParseError("invalid counter name in feature spec '" + std::string(text) + "'");
    }
    return std::string(name);
  };
  auto split_on = [&](char sep) {
    const auto at = body.find(sep);
    if (at == std::string_view::npos || body.find(sep, at + 1) != std::string_view::npos) {
      throw ParseError("malformed feature spec '" + std::string(text) + "'");
    }
    return std::pair{require_name(body.substr(0, at)), require_name(body.substr(at + 1))};
  };
  if (kind == "base") return base(require_name(body));
  if (kind == "inv") return inverted(require_name(body));
  if (kind == "prod") {
    auto [a, b] = split_on('*');
    return product(std::move(a), std::move(b));
  }
  if (kind == "ratio") {
    auto [a, b] = split_on('/');
    return ratio(std::move(a), std::move(b));
  }
  throw ParseError("unknown feature-spec kind '" + std::string(kind) + "'");
}

std::vector<std::string> FeatureSpec::counters() const {
  if (second_.empty()) return {first_};
  return {first_, second_};
}

std::string FeatureSpec::canonical() const {
  switch (kind_) {
    case FeatureKind::Base: return "base:" + first_;
    case FeatureKind::Inverted: return "inv:" + first_;
    case FeatureKind::Product: return "prod:" + first_ + "*" + second_;
    case FeatureKind::Ratio: return "ratio:" + first_ + "/" + second_;
  }
  return {};
}

double evaluate_feature(const FeatureSpec& spec, const RateMap& rates) {
  auto rate = [&](const std::string& name) {
    auto it = rates.find(name);
    if (it == rates.end()) throw Error("missing counter " + name);
    return it->second;
  };
  switch (spec.kind()) {
    case FeatureKind::Base: return rate(spec.first());
    case FeatureKind::Inverted: return -rate(spec.first());
    case FeatureKind::Product: return rate(spec.first()) * rate(spec.second());
    case FeatureKind::Ratio: {
      const double den = rate(spec.second());
      if (den == 0.0) throw Error("zero denominator in " + spec.canonical());
      return rate(spec.first()) / den;
    }
  }
  return 0.0;
}

std::vector<double> evaluate_column(const FeatureSpec& spec, const Dataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) out.push_back(evaluate_feature(spec, r));
  return out;
}

bool is_zero_variance(std::span<const double> values) {
  auto [m, s] = mean_and_std(values);
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, std::fabs(v));
  return s * s <= 1e-12 * peak * peak;
}

VarianceFilter drop_zero_variance(const Dataset& ds) {
  if (ds.size() < 2) throw Error("need at least 2 records");
  VarianceFilter out;
  for (const auto& name : ds.counter_names) {
    (is_zero_variance(ds.column(name)) ? out.dropped : out.retained).push_back(name);
  }
  if (out.retained.empty()) throw Error("no usable counters");
  return out;
}

std::vector<FeatureSpec> invert_negative(const Dataset& ds, const std::vector<std::string>& counters,
                                         double alpha) {
  const auto y = ds.targets();
  std::vector<FeatureSpec> out;
  out.reserve(counters.size());
  for (const auto& name : counters) {
    const double r = pearson(ds.column(name), y);
    const bool significant = pearson_p_value(r, ds.size()) < alpha;
    out.push_back(r < 0 && significant ? FeatureSpec::inverted(name) : FeatureSpec::base(name));
  }
  return out;
}

std::vector<FeatureSpec> enumerate_combined(const std::vector<std::string>& counters) {
  std::vector<std::string> names = counters;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<FeatureSpec> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) out.push_back(FeatureSpec::product(names[i], names[j]));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (i != j) out.push_back(FeatureSpec::ratio(names[i], names[j]));
    }
  }
  return out;
}

std::vector<FeatureSpec> generate_combined(const Dataset& ds, const std::vector<FeatureSpec>& base_specs,
                                           double alpha, std::size_t top_k, bool require_gain) {
  std::vector<std::string> counters;
  for (const auto& spec : base_specs) {
    if (spec.kind() != FeatureKind::Base && spec.kind() != FeatureKind::Inverted) {
      throw Error("generate_combined expects base or inverted specs, got " + spec.canonical());
    }
    counters.push_back(spec.first());
  }
  const auto y = ds.targets();
  std::map<std::string, std::vector<double>> columns;
  std::map<std::string, double> own_r;
  std::set<std::string> usable_denominator;
  for (const auto& name : counters) {
    auto col = ds.column(name);
    double peak = 0.0;
    for (double v : col) peak = std::max(peak, std::fabs(v));
    if (std::all_of(col.begin(), col.end(), [&](double v) { return std::fabs(v) >= 1e-9 * peak; }) && peak > 0) {
      usable_denominator.insert(name);
    }
    own_r[name] = is_zero_variance(col) ? 0.0 : std::fabs(pearson(col, y));
    columns.emplace(name, std::move(col));
  }

  struct Scored {
    double abs_r;
    std::string name;
    FeatureSpec spec;
  };
  std::vector<Scored> scored;
  std::vector<double> values(ds.size());
  for (auto& spec : enumerate_combined(counters)) {
    const auto& a = columns.at(spec.first());
    const auto& b = columns.at(spec.second());
    if (spec.kind() == FeatureKind::Ratio) {
      if (!usable_denominator.contains(spec.second())) continue;
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = a[i] / b[i];
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = a[i] * b[i];
    }
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) continue;
    if (is_zero_variance(values)) continue;
    const double r = pearson(values, y);
    if (!(pearson_p_value(r, ds.size()) < alpha)) continue;
    if (require_gain && std::fabs(r) <= std::max(own_r.at(spec.first()), own_r.at(spec.second()))) continue;
    std::string name = spec.canonical();
    scored.push_back({std::fabs(r), std::move(name), std::move(spec)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& l, const Scored& r) {
    if (l.abs_r != r.abs_r) return l.abs_r > r.abs_r;
    return l.name < r.name;
  });
  if (scored.size() > top_k) scored.erase(scored.begin() + static_cast<std::ptrdiff_t>(top_k), scored.end());

  std::vector<FeatureSpec> out = base_specs;
  for (auto& s : scored) out.push_back(std::move(s.spec));
  return out;
}

Eigen::MatrixXd FeatureMatrix::zscored() const {
  Eigen::MatrixXd z(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    z.col(j) = (values.col(j).array() - norm.mean[uj]) / norm.std[uj];
  }
  return z;
}

std::vector<std::string> FeatureMatrix::names() const {
  std::vector<std::string> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(s.canonical());
  return out;
}

FeatureMatrix build_matrix(const Dataset& ds, const std::vector<FeatureSpec>& specs) {
  std::set<std::string> seen;
  for (const auto& spec : specs) {
    if (!seen.insert(spec.canonical()).second) throw Error("duplicate canonical spec " + spec.canonical());
  }
  FeatureMatrix m;
  std::vector<std::vector<double>> kept;
  for (const auto& spec : specs) {
    auto col = evaluate_column(spec, ds);
    if (ds.size() < 2 || is_zero_variance(col)) {
      m.dropped.push_back(spec);
      continue;
    }
    m.specs.push_back(spec);
    kept.push_back(std::move(col));
  }
  m.values.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    for (std::size_t i = 0; i < ds.size(); ++i) m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kept[j][i];
  }
  m.norm = norm_stats(m.values);
  return m;
}

}  // namespace apgpm
