#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "apgpm/clustering.hpp"
#include "apgpm/features.hpp"

namespace apgpm {

struct ClusterInfo {
  std::size_t cluster_id = 0;
  std::vector<std::size_t> members;  // column indices into the FeatureMatrix
  double importance = 0.0;           // best single-feature R^2
  std::size_t representative = 0;    // column index achieving it
};

// Single-feature OLS of every member on raw values. Members are scanned in
// canonical-name order and a later one displaces the incumbent only if its
// R^2 is larger by more than kTieTolerance.
ClusterInfo cluster_importance(std::size_t cluster_id, const std::vector<std::size_t>& members,
                               const FeatureMatrix& train, std::span<const double> y);

struct SelectionOptions {
  double epsilon = 0.01;
  std::size_t patience = 5;
  // Acceptance requires R^2 to grow by more than this; absorbs round-off when
  // a candidate is an exact linear combination of the accepted set.
  double min_gain = 1e-10;
};

struct SignificantCluster {
  std::size_t cluster_id = 0;
  std::size_t representative = 0;  // column index
  std::vector<std::size_t> members;
};

struct TraceEntry {
  std::size_t cluster_id = 0;
  std::size_t best_member = 0;
  double r_squared = 0.0;
  bool accepted = false;
};

struct SelectionResult {
  std::vector<SignificantCluster> significant;
  std::vector<double> r2_trajectory;
  std::vector<std::size_t> skipped;
  std::size_t terminated_at = 0;  // clusters consumed from the sorted list
  std::vector<TraceEntry> trace;  // one per examined cluster, seed first

  std::vector<std::size_t> representatives() const;
};

// Greedy growth of the significant-cluster set. Clusters are visited in
// descending importance (ties: representative name). The search stops once
// R^2 has grown by less than epsilon over the last `patience` examined clusters.
SelectionResult select_significant(const ClusterAssignment& clusters, const FeatureMatrix& train,
                                   std::span<const double> y, const SelectionOptions& options = {});

std::string format_trace(const SelectionResult& result, const FeatureMatrix& matrix);

inline constexpr double kTieTolerance = 1e-12;

}  // namespace apgpm
