#include "apgpm/selection.hpp"

#include <algorithm>
#include <cstdio>

namespace apgpm {
namespace {

std::vector<std::size_t> by_name(std::vector<std::size_t> members, const FeatureMatrix& m) {
  std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
    return m.specs[a].canonical() < m.specs[b].canonical();
  });
  return members;
}

Eigen::MatrixXd gather(const FeatureMatrix& m, const std::vector<std::size_t>& columns) {
  Eigen::MatrixXd x(m.values.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = m.values.col(static_cast<Eigen::Index>(columns[j]));
  return x;
}

}  // namespace

std::vector<std::size_t> SelectionResult::representatives() const {
  std::vector<std::size_t> out;
  for (const auto& s : significant) out.push_back(s.representative);
  return out;
}

ClusterInfo cluster_importance(std::size_t cluster_id, const std::vector<std::size_t>& members,
                               const FeatureMatrix& train, std::span<const double> y) {
  if (members.empty()) throw Error("cluster " + std::to_string(cluster_id) + " is empty");
  ClusterInfo info;
  info.cluster_id = cluster_id;
  info.members = members;
  bool first = true;
  for (std::size_t m : by_name(members, train)) {
    const double r2 = ols_fit(gather(train, {m}), y).r_squared;
    if (first || r2 > info.importance + kTieTolerance) {
      info.importance = r2;
      info.representative = m;
      first = false;
    }
  }
  info.importance = std::clamp(info.importance, 0.0, 1.0);
  return info;
}

SelectionResult select_significant(const ClusterAssignment& clusters, const FeatureMatrix& train,
                                   std::span<const double> y, const SelectionOptions& options) {
  if (clusters.n_clusters == 0) throw Error("selection needs at least one cluster");
  if (!(options.epsilon > 0)) throw Error("selection epsilon must be positive");
  if (options.patience < 1) throw Error("selection patience must be at least 1");

  const auto groups = clusters.members();
  std::vector<ClusterInfo> infos;
  infos.reserve(groups.size());
  for (std::size_t c = 0; c < groups.size(); ++c) infos.push_back(cluster_importance(c, groups[c], train, y));
  std::sort(infos.begin(), infos.end(), [&](const ClusterInfo& a, const ClusterInfo& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return train.specs[a.representative].canonical() < train.specs[b.representative].canonical();
  });

  SelectionResult result;
  const ClusterInfo& seed = infos.front();
  double r2_sc = seed.importance;
  result.significant.push_back({seed.cluster_id, seed.representative, seed.members});
  result.r2_trajectory.push_back(r2_sc);
  result.trace.push_back({seed.cluster_id, seed.representative, r2_sc, true});
  std::vector<double> history{r2_sc};  // R^2_sc after each examined cluster

  result.terminated_at = infos.size();
  for (std::size_t idx = 1; idx < infos.size(); ++idx) {
    const ClusterInfo& candidate = infos[idx];
    std::vector<std::size_t> columns = result.representatives();
    columns.push_back(0);
    double best_r2 = 0.0;
    std::size_t best_member = candidate.representative;
    bool first = true;
    for (std::size_t m : by_name(candidate.members, train)) {
      columns.back() = m;
      const double r2 = ols_fit(gather(train, columns), y).r_squared;
      if (first || r2 > best_r2 + kTieTolerance) {
        best_r2 = r2;
        best_member = m;
        first = false;
      }
    }
    const bool accept = best_r2 > r2_sc + options.min_gain;
    if (accept) {
      r2_sc = best_r2;
      result.significant.push_back({candidate.cluster_id, best_member, candidate.members});
      result.r2_trajectory.push_back(r2_sc);
    } else {
      result.skipped.push_back(candidate.cluster_id);
    }
    result.trace.push_back({candidate.cluster_id, best_member, best_r2, accept});
    history.push_back(r2_sc);
    if (idx >= options.patience && history[idx] - history[idx - options.patience] < options.epsilon) {
      result.terminated_at = idx + 1;
      break;
    }
  }
  return result;
}

std::string format_trace(const SelectionResult& result, const FeatureMatrix& matrix) {
  std::string out;
  char buf[64];
  for (const auto& e : result.trace) {
    std::snprintf(buf, sizeof buf, "%.12f", e.r_squared);
    out += "cluster=" + std::to_string(e.cluster_id) + " member=" + matrix.specs.at(e.best_member).canonical() +
           " r2=" + buf + (e.accepted ? " accept" : " reject") + "\n";
  }
  out += "terminated_at=" + std::to_string(result.terminated_at) + "\n";
  return out;
}

}  // namespace apgpm
