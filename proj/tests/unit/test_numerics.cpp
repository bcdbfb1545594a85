#include <doctest.h>

#include <cmath>
#include <random>

#include "apgpm/numerics.hpp"
#include "../oracles.hpp"

using namespace apgpm;

namespace {

Eigen::MatrixXd to_eigen(const oracle::Matrix& m) {
  Eigen::MatrixXd out(m.size(), m.front().size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = m[i][j];
  }
  return out;
}

std::vector<double> fitted(const Regression& reg, const oracle::Matrix& x) {
  std::vector<double> out;
  for (const auto& row : x) {
    double v = reg.intercept;
    for (std::size_t j = 0; j < row.size(); ++j) v += reg.coefficients[j] * row[j];
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("pearson: reference values") {
  std::vector<double> x{1, 2, 3};
  CHECK(pearson(x, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson(x, std::vector<double>{6, 4, 2}) == doctest::Approx(-1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{2, 1, 4, 3, 5}) == doctest::Approx(0.8));
  CHECK_THROWS_WITH(pearson(x, std::vector<double>{1, 1, 1}), doctest::Contains("degenerate series"));
  CHECK_THROWS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}));
}

TEST_CASE("pearson: symmetry, affine invariance and exact negation") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(12), y(12), ax(12), neg(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = g(rng);
      y[i] = x[i] + g(rng);
    }
    const double a = trial % 2 ? 3.5 : -0.25, b = 7.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ax[i] = a * x[i] + b;
      neg[i] = -x[i];
    }
    const double r = pearson(x, y);
    CHECK(r == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-12));
    CHECK(pearson(y, x) == doctest::Approx(r).epsilon(1e-14));
    CHECK(pearson(ax, y) == doctest::Approx(std::copysign(1.0, a) * r).epsilon(1e-12));
    CHECK(pearson(neg, y) == -r);
  }
}

TEST_CASE("p-value of Pearson r") {
  CHECK(pearson_p_value(0.0, 5) == 1.0);
  CHECK(pearson_p_value(0.0, 1000) == 1.0);
  CHECK(std::fabs(pearson_p_value(0.6319, 10) - 0.050) <= 0.001);
  CHECK(pearson_p_value(0.99, 100) < 1e-10);
  CHECK(pearson_p_value(1.0, 10) == 0.0);
  CHECK(pearson_p_value(-1.0, 10) == 0.0);
  CHECK(pearson_p_value(-0.5, 20) == pearson_p_value(0.5, 20));
  CHECK_THROWS(pearson_p_value(0.5, 2));
  CHECK_THROWS(pearson_p_value(1.5, 10));
}

TEST_CASE("p-value agrees with the quadrature t oracle") {
  for (std::size_t n : {3u, 4u, 5u, 10u, 30u, 100u}) {
    for (double r : {0.05, 0.2, 0.45, 0.6319, 0.8, 0.95}) {
      const double expected = oracle::pearson_p(r, n);
      CHECK(pearson_p_value(r, n) == doctest::Approx(expected).epsilon(1e-7));
    }
  }
  CHECK(pearson_p_value(0.99, 100) == doctest::Approx(oracle::pearson_p(0.99, 100)).epsilon(1e-6));
}

TEST_CASE("incomplete beta: closed forms") {
  CHECK(incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3));
  CHECK(incomplete_beta(2, 1, 0.5) == doctest::Approx(0.25));
  CHECK(incomplete_beta(1, 3, 0.2) == doctest::Approx(1 - std::pow(0.8, 3)));
  CHECK(incomplete_beta(2.5, 1.5, 0) == 0);
  CHECK(incomplete_beta(2.5, 1.5, 1) == 1);
  CHECK_THROWS(incomplete_beta(0, 1, 0.5));
}

TEST_CASE("ols: exact line and rank deficiency") {
  oracle::Matrix x{{1}, {2}, {3}};
  std::vector<double> y{3, 5, 7};
  auto reg = ols_fit(to_eigen(x), y);
  CHECK(reg.coefficients[0] == doctest::Approx(2));
  CHECK(reg.intercept == doctest::Approx(1));
  CHECK(reg.r_squared == doctest::Approx(1));

  oracle::Matrix dup{{1, 1}, {2, 2}, {3, 3}, {5, 5}};
  std::vector<double> yd{3, 5, 7, 11};
  auto split = ols_fit(to_eigen(dup), yd);
  CHECK(split.coefficients[0] == doctest::Approx(1));
  CHECK(split.coefficients[1] == doctest::Approx(1));
  auto pred = fitted(split, dup);
  for (std::size_t i = 0; i < yd.size(); ++i) CHECK(pred[i] == doctest::Approx(yd[i]));
}

TEST_CASE("ols: constant target") {
  oracle::Matrix x{{1}, {2}, {3}};
  auto flat = ols_fit(to_eigen(x), std::vector<double>{4, 4, 4});
  CHECK(flat.degenerate_target);
  CHECK(flat.r_squared == 1.0);
  CHECK(flat.intercept == doctest::Approx(4));
  CHECK_THROWS(ols_fit(to_eigen({{1}}), std::vector<double>{1}));
}

TEST_CASE("ols: random instances against the normal equations") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t p = 1 + trial % 5;
    const std::size_t n = p + 3 + trial % 12;
    oracle::Matrix x(n, std::vector<double>(p));
    std::vector<double> y(n);
    for (auto& row : x) {
      for (auto& v : row) v = u(rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = 3 + u(rng);
      for (std::size_t j = 0; j < p; ++j) y[i] += (j + 1) * x[i][j];
    }
    auto reg = ols_fit(to_eigen(x), y);
    auto ref = oracle::normal_equations(x, y);
    for (std::size_t j = 0; j < p; ++j) CHECK(reg.coefficients[j] == doctest::Approx(ref.coefficients[j]).epsilon(1e-8));
    CHECK(reg.intercept == doctest::Approx(ref.intercept).epsilon(1e-8));

    // residuals orthogonal to the design
    auto pred = fitted(reg, x);
    double scale = 0;
    for (double v : y) scale = std::max(scale, std::fabs(v));
    double ones = 0;
    for (std::size_t i = 0; i < n; ++i) ones += y[i] - pred[i];
    CHECK(std::fabs(ones) <= 1e-8 * scale * n);
    for (std::size_t j = 0; j < p; ++j) {
      double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += (y[i] - pred[i]) * x[i][j];
      CHECK(std::fabs(dot) <= 1e-8 * scale * 5 * n);
    }
  }
}

TEST_CASE("ols: R^2 never falls when a column is appended") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 15;
    Eigen::MatrixXd x(n, 4);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < 4; ++j) x(i, j) = g(rng);
      y[i] = x(i, 0) + g(rng);
    }
    double prev = -1;
    for (int p = 1; p <= 4; ++p) {
      const double r2 = ols_fit(x.leftCols(p), y).r_squared;
      CHECK(r2 >= prev - 1e-10);
      CHECK(r2 <= 1.0 + 1e-12);
      prev = r2;
    }
  }
}

TEST_CASE("evaluate: error metrics") {
  std::vector<double> t{100, 200, 300};
  auto same = evaluate(t, t);
  CHECK(same.mae_mean == 0);
  CHECK(same.mape_mean == 0);
  CHECK(same.r_squared == 1);

  CHECK(evaluate(std::vector<double>{110, 180}, std::vector<double>{100, 200}).mape_mean == doctest::Approx(10));
  auto r = evaluate(std::vector<double>{110, 180, 330}, t);
  CHECK(r.mae_mean == doctest::Approx(20));
  CHECK(r.mae_median == doctest::Approx(20));
  CHECK(r.n == 3);

  auto excl = evaluate(std::vector<double>{1, 110}, std::vector<double>{0, 100});
  CHECK(excl.mape_excluded == 1);
  CHECK(excl.mape_mean == doctest::Approx(10));
  CHECK_THROWS(evaluate(std::vector<double>{1, 2}, std::vector<double>{0, 0}));
  CHECK_THROWS(evaluate(std::vector<double>{1}, std::vector<double>{1, 2}));
}

TEST_CASE("evaluate: MAPE is scale invariant") {
  std::vector<double> t{120, 340, 90, 410}, p{130, 300, 95, 400};
  const double base = evaluate(p, t).mape_mean;
  for (double s : {0.001, 3.0, 1000.0}) {
    std::vector<double> ts, ps;
    for (std::size_t i = 0; i < t.size(); ++i) {
      ts.push_back(t[i] * s);
      ps.push_back(p[i] * s);
    }
    CHECK(evaluate(ps, ts).mape_mean == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("zscore") {
  std::vector<double> v{2, 4, 6};
  auto [m, s] = mean_and_std(v);
  CHECK(s == doctest::Approx(std::sqrt(8.0 / 3.0)));
  auto z = zscore(v, m, s);
  CHECK(z[0] == doctest::Approx(-1.224744871));
  CHECK(z[1] == doctest::Approx(0).epsilon(1e-12));
  CHECK(z[2] == doctest::Approx(1.224744871));

  std::vector<double> shifted{102, 104, 106};
  auto [ms, ss] = mean_and_std(shifted);
  auto zs = zscore(shifted, ms, ss);
  for (std::size_t i = 0; i < 3; ++i) CHECK(zs[i] == doctest::Approx(z[i]));

  auto [mz, sz] = mean_and_std(z);
  auto zz = zscore(z, mz, sz);
  for (std::size_t i = 0; i < 3; ++i) CHECK(zz[i] == doctest::Approx(z[i]));
  CHECK_THROWS(zscore(v, 0, 0));
}

TEST_CASE("summation helpers") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100).epsilon(1e-14));
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS(mean(std::vector<double>{}));
}
