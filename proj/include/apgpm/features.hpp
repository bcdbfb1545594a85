#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "apgpm/dataset.hpp"
#include "apgpm/numerics.hpp"

namespace apgpm {

enum class FeatureKind { Base, Inverted, Product, Ratio };

// Symbolic model input. Product operands are kept in lexicographic order.
class FeatureSpec {
 public:
  static FeatureSpec base(std::string name);
  static FeatureSpec inverted(std::string name);
  static FeatureSpec product(std::string a, std::string b);
  static FeatureSpec ratio(std::string numerator, std::string denominator);

  // Inverse of canonical(): `base:N`, `inv:N`, `prod:A*B`, `ratio:NUM/DEN`.
  static FeatureSpec parse(std::string_view text);

  FeatureKind kind() const { return kind_; }
  const std::string& first() const { return first_; }
  // Empty for Base and Inverted.
  const std::string& second() const { return second_; }
  std::vector<std::string> counters() const;
  std::string canonical() const;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
  friend bool operator<(const FeatureSpec& a, const FeatureSpec& b) {
    return a.canonical() < b.canonical();
  }

 private:
  FeatureSpec(FeatureKind kind, std::string first, std::string second)
      : kind_(kind), first_(std::move(first)), second_(std::move(second)) {}

  FeatureKind kind_;
  std::string first_;
  std::string second_;
};

double evaluate_feature(const FeatureSpec& spec, const RateMap& rates);
inline double evaluate_feature(const FeatureSpec& spec, const RunRecord& record) {
  return evaluate_feature(spec, record.rates);
}
std::vector<double> evaluate_column(const FeatureSpec& spec, const Dataset& ds);

struct VarianceFilter {
  std::vector<std::string> retained;
  std::vector<std::string> dropped;
};

// Drops counters with population variance <= 1e-12 * max|value|^2.
VarianceFilter drop_zero_variance(const Dataset& ds);
bool is_zero_variance(std::span<const double> values);

// One spec per counter: Inverted when significantly negatively correlated
// with the target current, Base otherwise.
std::vector<FeatureSpec> invert_negative(const Dataset& ds, const std::vector<std::string>& counters,
                                         double alpha);

// All unordered-pair products and ordered-pair ratios over the given counters.
std::vector<FeatureSpec> enumerate_combined(const std::vector<std::string>& counters);

// base_specs followed by the top_k significant combined candidates, ranked by
// |r| with target current (ties: canonical name ascending). With
// require_gain, a candidate must also correlate more strongly than each of
// its two counters alone.
std::vector<FeatureSpec> generate_combined(const Dataset& ds, const std::vector<FeatureSpec>& base_specs,
                                           double alpha, std::size_t top_k, bool require_gain = true);

struct FeatureMatrix {
  std::vector<FeatureSpec> specs;
  Eigen::MatrixXd values;  // runs x features, raw
  NormStats norm;
  std::vector<FeatureSpec> dropped;  // zero-variance columns removed at build time

  Eigen::MatrixXd zscored() const;
  std::vector<std::string> names() const;
};

FeatureMatrix build_matrix(const Dataset& ds, const std::vector<FeatureSpec>& specs);

}  // namespace apgpm
