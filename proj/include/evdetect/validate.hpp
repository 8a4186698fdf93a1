#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "evdetect/cluster.hpp"
#include "evdetect/common.hpp"
#include "evdetect/corpus.hpp"
#include "evdetect/embed.hpp"
#include "json.hpp"

namespace evdetect {

struct CsaiPartition {
  Matrix training;               // rows the clustering was fitted on
  ClusteringResult clustering;   // labels aligned with training rows
};

struct CsaiInputs {
  std::vector<CsaiPartition> partitions;
  Matrix validation;  // shared by every partition
};

struct CsaiReport {
  int K = 0;
  std::vector<int> N_per_partition;
  int F = 0;
  std::vector<std::pair<double, double>> T_range;  // (T_min, T_max) per partition
  // Per partition, per cluster; empty optional = no validation rows (skipped).
  std::vector<std::vector<std::optional<double>>> per_cluster_nrmse;
  std::vector<double> per_partition_csai;
  double csai = 0.0;
  int skipped_clusters = 0;
  std::vector<Matrix> training_centroids;    // N_j x F per partition
  std::vector<Matrix> validation_centroids;  // N_j x F; skipped rows are NaN
};

/// Validation rows go to the nearest training representative; each cluster is
/// scored by the RMS gap between its training and validation feature means,
/// scaled by the range of the partition's training matrix.
CsaiReport csai(const CsaiInputs& inputs);

nlohmann::json to_json(const CsaiReport& report);

struct StabilityProfile {
  std::vector<double> per_partition_csai;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  CsaiReport report;
};

/// Fits spec independently on every training subset of the plan and scores
/// each against the shared validation rows.
StabilityProfile stability_profile(const EmbeddingMatrix& embeddings, const ClusterSpec& spec,
                                   const PartitionPlan& plan);

nlohmann::json to_json(const StabilityProfile& profile);

/// Mean silhouette over non-noise rows; members of singleton clusters score 0.
double silhouette(const Matrix& X, const std::vector<int>& labels);

/// (BCSS / (k - 1)) / (WCSS / (n - k)) over non-noise rows; +infinity when WCSS = 0.
double calinski_harabasz(const Matrix& X, const std::vector<int>& labels);

}  // namespace evdetect
