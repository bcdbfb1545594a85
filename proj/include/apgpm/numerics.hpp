#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "apgpm/error.hpp"

namespace apgpm {

// Pairwise (cascade) summation; result does not depend on any parallel schedule.
double pairwise_sum(std::span<const double> values);
double mean(std::span<const double> values);
double median(std::vector<double> values);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // population convention (divisor n)
};

// Population mean and standard deviation of one series.
std::pair<double, double> mean_and_std(std::span<const double> values);
NormStats norm_stats(const Eigen::MatrixXd& columns);

std::vector<double> zscore(std::span<const double> values, double mean, double std);

// Pearson correlation. Throws on length mismatch, n < 3 or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Regularized incomplete beta I_x(a, b) by continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

// Two-tailed p-value of a Pearson r under the null of no correlation, via the
// Student t distribution with n - 2 degrees of freedom. |r| >= 1 yields 0.
double pearson_p_value(double r, std::size_t n);

struct Regression {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double r_squared = 0.0;
  bool degenerate_target = false;  // y constant; r_squared is then 1 or 0
};

// Least squares with an intercept column. Rank-deficient designs get the
// minimum-norm slope vector (in column-equilibrated coordinates); the
// intercept is never penalized.
Regression ols_fit(const Eigen::MatrixXd& x, std::span<const double> y);

double r_squared(std::span<const double> truth, std::span<const double> predictions,
                 bool* degenerate = nullptr);

struct EvalReport {
  double r_squared = 0.0;
  double mae_mean = 0.0;     // mA
  double mae_median = 0.0;   // mA
  double mape_mean = 0.0;    // percent
  double mape_median = 0.0;  // percent
  std::size_t n = 0;
  std::size_t mape_excluded = 0;  // zero-truth samples left out of MAPE
};

EvalReport evaluate(std::span<const double> predictions, std::span<const double> truth);

}  // namespace apgpm
