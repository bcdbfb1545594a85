#include "apgpm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace apgpm {
namespace {

constexpr std::size_t kPairwiseBlock = 8;

// Columns whose centered norm falls below this fraction of their magnitude
// are treated as constant.
constexpr double kConstantColumnTol = 1e-12;
// Pivot threshold for the orthogonal decomposition on unit-norm columns.
constexpr double kRankTol = 1e-10;

}  // namespace

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= kPairwiseBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error("mean of empty series");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of empty series");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  const double m = mean(values);
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m;
    sq[i] = d * d;
  }
  return {m, std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size()))};
}

NormStats norm_stats(const Eigen::MatrixXd& columns) {
  NormStats stats;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    auto [m, s] = mean_and_std(std::span<const double>(columns.col(j).data(), static_cast<std::size_t>(columns.rows())));
    stats.mean.push_back(m);
    stats.std.push_back(s);
  }
  return stats;
}

std::vector<double> zscore(std::span<const double> values, double m, double s) {
  if (!(s > 0)) throw Error("z-score requires a positive standard deviation");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - m) / s;
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: series lengths differ");
  if (x.size() < 3) throw Error("pearson: need at least 3 samples");
  const double mx = mean(x);
  const double my = mean(y);
  const std::size_t n = x.size();
  std::vector<double> sxy(n), sxx(n), syy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy[i] = dx * dy;
    sxx[i] = dx * dx;
    syy[i] = dy * dy;
  }
  const double vx = pairwise_sum(sxx);
  const double vy = pairwise_sum(syy);
  if (!(vx > 0) || !(vy > 0)) throw Error("pearson: degenerate series");
  const double r = pairwise_sum(sxy) / (std::sqrt(vx) * std::sqrt(vy));
  return std::clamp(r, -1.0, 1.0);
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw Error("incomplete beta: shape parameters must be positive");
  if (x < 0 || x > 1) throw Error("incomplete beta: x outside [0,1]");
  if (x == 0) return 0.0;
  if (x == 1) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw Error("p-value: need at least 3 samples");
  if (!std::isfinite(r) || std::fabs(r) > 1.0) throw Error("p-value: r outside [-1,1]");
  if (std::fabs(r) == 1.0) return 0.0;
  if (r == 0.0) return 1.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  // Two-tailed: P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
  const double p = incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

double r_squared(std::span<const double> truth, std::span<const double> predictions, bool* degenerate) {
  if (truth.size() != predictions.size() || truth.empty()) throw Error("r_squared: length mismatch");
  const std::size_t n = truth.size();
  const double m = mean(truth);
  std::vector<double> res(n), tot(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = truth[i] - predictions[i];
    const double d = truth[i] - m;
    res[i] = e * e;
    tot[i] = d * d;
    scale = std::max(scale, std::fabs(truth[i]));
  }
  const double ss_res = pairwise_sum(res);
  const double ss_tot = pairwise_sum(tot);
  const double floor = static_cast<double>(n) * (kConstantColumnTol * scale) * (kConstantColumnTol * scale);
  if (ss_tot <= floor) {
    if (degenerate) *degenerate = true;
    return ss_res <= std::max(floor, std::numeric_limits<double>::min()) ? 1.0 : 0.0;
  }
  if (degenerate) *degenerate = false;
  return 1.0 - ss_res / ss_tot;
}

Regression ols_fit(const Eigen::MatrixXd& x, std::span<const double> y) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (n < 2) throw Error("ols: need at least 2 samples");
  if (p < 1) throw Error("ols: need at least 1 feature");
  if (static_cast<std::size_t>(n) != y.size()) throw Error("ols: target length does not match rows");

  const double y_mean = mean(y);
  Eigen::VectorXd yc(n);
  for (Eigen::Index i = 0; i < n; ++i) yc(i) = y[static_cast<std::size_t>(i)] - y_mean;

  Eigen::MatrixXd a(n, p);
  std::vector<double> col_mean(static_cast<std::size_t>(p)), col_scale(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    col_mean[uj] = mean(std::span<const double>(x.col(j).data(), static_cast<std::size_t>(n)));
    a.col(j) = x.col(j).array() - col_mean[uj];
    const double norm = a.col(j).norm();
    const double magnitude = x.col(j).cwiseAbs().maxCoeff() * std::sqrt(static_cast<double>(n));
    if (norm <= kConstantColumnTol * magnitude || norm == 0.0) {
      col_scale[uj] = 0.0;
      a.col(j).setZero();
    } else {
      col_scale[uj] = norm;
      a.col(j) /= norm;
    }
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(kRankTol);
  cod.compute(a);
  Eigen::VectorXd beta = cod.solve(yc);

  Regression reg;
  reg.coefficients.resize(static_cast<std::size_t>(p));
  std::vector<double> offset(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    reg.coefficients[uj] = col_scale[uj] > 0 ? beta(j) / col_scale[uj] : 0.0;
    offset[uj] = col_mean[uj] * reg.coefficients[uj];
  }
  reg.intercept = y_mean - pairwise_sum(offset);

  std::vector<double> fitted(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> terms(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) terms[static_cast<std::size_t>(j)] = x(i, j) * reg.coefficients[static_cast<std::size_t>(j)];
    fitted[static_cast<std::size_t>(i)] = reg.intercept + pairwise_sum(terms);
  }
  reg.r_squared = r_squared(y, fitted, &reg.degenerate_target);
  return reg;
}

EvalReport evaluate(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) throw Error("evaluate: length mismatch");
  if (truth.empty()) throw Error("evaluate: empty series");
  EvalReport report;
  report.n = truth.size();
  std::vector<double> abs_err, pct_err;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = std::fabs(predictions[i] - truth[i]);
    abs_err.push_back(e);
    if (truth[i] > 0) {
      pct_err.push_back(100.0 * e / truth[i]);
    } else {
      ++report.mape_excluded;
    }
  }
  if (pct_err.empty()) throw Error("evaluate: MAPE undefined, every truth value is zero");
  report.mae_mean = mean(abs_err);
  report.mae_median = median(abs_err);
  report.mape_mean = mean(pct_err);
  report.mape_median = median(pct_err);
  report.r_squared = r_squared(truth, predictions);
  return report;
}

}  // namespace apgpm
