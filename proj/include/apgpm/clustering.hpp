#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace apgpm {

// Node ids follow the usual linkage convention: leaves are 0..n-1 and the
// k-th merge creates node n+k.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;  // increase in within-cluster sum of squares
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;
};

struct ClusterAssignment {
  std::vector<std::size_t> cluster_of;
  std::size_t n_clusters = 0;

  std::vector<std::vector<std::size_t>> members() const;
};

// Ward agglomeration of the feature columns of a z-scored matrix. Equal
// heights are broken by the lexicographically smallest (min-name, max-name)
// pair of cluster labels, where a cluster's label is its smallest leaf name.
Dendrogram ward_cluster(const Eigen::MatrixXd& z_matrix, const std::vector<std::string>& names);

// Connected components of all merges with height < threshold. Cluster ids are
// numbered by first appearance in leaf order.
ClusterAssignment cut_dendrogram(const Dendrogram& dendrogram, double threshold);

inline double default_cut_threshold(std::size_t n_samples, double factor = 0.05) {
  return factor * static_cast<double>(n_samples);
}

std::string dendrogram_json(const Dendrogram& dendrogram);

}  // namespace apgpm
