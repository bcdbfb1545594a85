#include "apgpm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "apgpm/error.hpp"
#include "apgpm/numerics.hpp"

namespace apgpm {
namespace {

constexpr double kZscoreMeanTol = 1e-6;
// Heights this close are tied; Lance-Williams rounding would otherwise pick the winner.
constexpr double kTieTol = 1e-10;

bool heights_tied(double x, double y) { return std::fabs(x - y) <= kTieTol * std::max({1.0, std::fabs(x), std::fabs(y)}); }

struct WardState {
  std::size_t n;
  std::vector<double> dist;  // n x n, symmetric, slot-indexed
  std::vector<std::string> label;
  std::vector<std::size_t> size;
  std::vector<std::size_t> node;
  std::vector<bool> active;
  std::vector<std::size_t> nn;

  double& d(std::size_t i, std::size_t j) { return dist[i * n + j]; }

  // (min label, max label) ordering used to break height ties.
  bool pair_less(std::size_t a, std::size_t b, std::size_t c, std::size_t e) const {
    const std::string* a1 = &label[a];
    const std::string* a2 = &label[b];
    if (*a2 < *a1) std::swap(a1, a2);
    const std::string* c1 = &label[c];
    const std::string* c2 = &label[e];
    if (*c2 < *c1) std::swap(c1, c2);
    if (*a1 != *c1) return *a1 < *c1;
    return *a2 < *c2;
  }

  bool better(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    const double x = d(i, j);
    const double y = d(k, l);
    if (!heights_tied(x, y)) return x < y;
    return pair_less(i, j, k, l);
  }

  void refresh_nn(std::size_t i) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (best == n || better(i, j, i, best)) best = j;
    }
    nn[i] = best;
  }
};

}  // namespace

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(n_clusters);
  for (std::size_t i = 0; i < cluster_of.size(); ++i) out[cluster_of[i]].push_back(i);
  return out;
}

Dendrogram ward_cluster(const Eigen::MatrixXd& z, const std::vector<std::string>& names) {
  const auto n = static_cast<std::size_t>(z.cols());
  const auto samples = static_cast<std::size_t>(z.rows());
  if (n < 2) throw Error("ward: need at least 2 features");
  if (names.size() != n) throw Error("ward: one name per feature required");
  if (std::set<std::string>(names.begin(), names.end()).size() != n) throw Error("ward: feature names must be unique");
  for (std::size_t j = 0; j < n; ++j) {
    const double m = mean(std::span<const double>(z.col(static_cast<Eigen::Index>(j)).data(), samples));
    if (std::fabs(m) > kZscoreMeanTol) throw Error("ward: input column '" + names[j] + "' is not z-scored");
  }

  WardState st{n, std::vector<double>(n * n, 0.0), names, std::vector<std::size_t>(n, 1),
               std::vector<std::size_t>(n), std::vector<bool>(n, true), std::vector<std::size_t>(n, n)};
  std::iota(st.node.begin(), st.node.end(), std::size_t{0});

  // Singleton merge cost is half the squared Euclidean distance.
  std::vector<double> sq(samples);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t s = 0; s < samples; ++s) {
        const double diff = z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) -
                            z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
        sq[s] = diff * diff;
      }
      const double h = 0.5 * pairwise_sum(sq);
      st.d(i, j) = h;
      st.d(j, i) = h;
    }
  }
  for (std::size_t i = 0; i < n; ++i) st.refresh_nn(i);

  Dendrogram out;
  out.leaves = names;
  out.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!st.active[i]) continue;
      if (bi == n || st.better(i, st.nn[i], bi, st.nn[bi])) bi = i;
    }
    std::size_t a = bi;
    std::size_t b = st.nn[bi];
    if (st.label[b] < st.label[a]) std::swap(a, b);

    const double height = std::max(0.0, st.d(a, b));
    const double na = static_cast<double>(st.size[a]);
    const double nb = static_cast<double>(st.size[b]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!st.active[k] || k == a || k == b) continue;
      const double nk = static_cast<double>(st.size[k]);
      // Lance-Williams update for Ward.
      const double v = std::max(0.0, ((na + nk) * st.d(k, a) + (nb + nk) * st.d(k, b) - nk * height) / (na + nb + nk));
      st.d(k, a) = v;
      st.d(a, k) = v;
    }
    out.merges.push_back({st.node[a], st.node[b], height, st.size[a] + st.size[b]});

    st.active[b] = false;
    st.size[a] += st.size[b];
    st.node[a] = n + step;
    // label[a] is already the smaller of the two

    st.refresh_nn(a);
    for (std::size_t k = 0; k < n; ++k) {
      if (!st.active[k] || k == a) continue;
      if (st.nn[k] == a || st.nn[k] == b) {
        st.refresh_nn(k);
      } else if (st.better(k, a, k, st.nn[k])) {
        st.nn[k] = a;
      }
    }
  }
  return out;
}

ClusterAssignment cut_dendrogram(const Dendrogram& dendrogram, double threshold) {
  if (threshold < 0) throw Error("cut threshold must be non-negative");
  const std::size_t n = dendrogram.leaves.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  // Any leaf of each node stands in for it.
  std::vector<std::size_t> leaf_of(n + dendrogram.merges.size());
  std::iota(leaf_of.begin(), leaf_of.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
  for (std::size_t k = 0; k < dendrogram.merges.size(); ++k) {
    const Merge& m = dendrogram.merges[k];
    leaf_of[n + k] = leaf_of.at(m.left);
    if (m.height < threshold) {
      std::size_t ra = find(leaf_of.at(m.left));
      std::size_t rb = find(leaf_of.at(m.right));
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  ClusterAssignment out;
  out.cluster_of.resize(n);
  std::vector<std::size_t> dense(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t root = find(i);
    if (dense[root] == n) dense[root] = out.n_clusters++;
    out.cluster_of[i] = dense[root];
  }
  return out;
}

std::string dendrogram_json(const Dendrogram& dendrogram) {
  nlohmann::json j;
  j["leaves"] = dendrogram.leaves;
  j["merges"] = nlohmann::json::array();
  for (const auto& m : dendrogram.merges) {
    j["merges"].push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
  }
  return j.dump(2) + "\n";
}

}  // namespace apgpm
