#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evdetect/common.hpp"
#include "json.hpp"

namespace evdetect {

struct WssCurve {
  std::vector<int> ks;
  std::vector<double> wss;
  int chosen_k = 0;
  bool flat = false;  // no point lies off the chord; chosen_k = ks.front()
};

struct MergeStep {
  int left = 0;   // smaller id; points are 0..n-1, merged clusters n..2n-2
  int right = 0;
  double distance = 0.0;
  int size = 0;
};

struct MergeTable {
  std::vector<MergeStep> rows;
};

struct GmmModel {
  Vector weights;
  Matrix means;                             // k x F
  std::vector<Eigen::MatrixXd> covariances;  // k of F x F, ridge included
  std::vector<double> loglik_trace;         // total log-likelihood per E-step
  double reg = 1e-6;
};

struct CondensedRow {
  int parent = 0;  // cluster ids start at n (the root)
  int child = 0;   // < n: a point falling out; >= n: a child cluster
  double lambda = 0.0;
  int child_size = 0;
};

struct CondensedTree {
  int n_points = 0;
  std::vector<CondensedRow> rows;
  std::map<int, double> stability;  // cluster id -> excess of mass
  std::vector<int> selected;        // cluster ids, ascending; label r <-> selected[r]
};

using ClusterExtras = std::variant<std::monostate, WssCurve, MergeTable, GmmModel, CondensedTree>;

struct ClusteringResult {
  std::string algorithm;
  std::vector<int> labels;  // -1 = noise
  int k = 0;
  Matrix representatives;   // k x F; row r belongs to cluster r
  ClusterExtras extras;
  std::uint64_t seed = 0;
  double objective = 0.0;              // WSS, PAM cost, or log-likelihood
  std::vector<double> objective_trace;  // k-means: WSS per Lloyd step; PAM: cost after BUILD and each swap
};

/// Sum of squared distances of labelled rows to their cluster centroids.
double within_cluster_ss(const Matrix& X, const std::vector<int>& labels, const Matrix& centroids);

/// Per-cluster means of the non-noise rows (k x F).
Matrix cluster_means(const Matrix& X, const std::vector<int>& labels, int k);

// ---------------------------------------------------------------------------

struct KmeansOptions {
  int max_iter = 300;
  double tol = 1e-6;  // stop when every centroid moves less than tol
  int restarts = 10;
};

/// k-means++ seeding, Lloyd iterations, best of restarts by WSS. An emptied
/// cluster claims the point farthest from its own centroid.
ClusteringResult kmeans(const Matrix& X, int k, std::uint64_t seed, const KmeansOptions& opts = {});

/// The k maximizing the perpendicular distance from (k, wss) to the chord
/// joining the curve's endpoints; the smallest such k on ties.
WssCurve choose_elbow(const std::vector<int>& ks, const std::vector<double>& wss);

/// Runs kmeans for every k in [k_min, k_max] and applies choose_elbow.
WssCurve elbow_select_k(const Matrix& X, int k_min, int k_max, std::uint64_t seed,
                        const KmeansOptions& opts = {});

/// k-medoids: greedy BUILD then best-improvement SWAP until no swap lowers the
/// total Euclidean dissimilarity. Representatives are data rows ordered by row index.
ClusteringResult pam(const Matrix& X, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------

enum class Linkage { single, complete, average, ward };

std::string to_string(Linkage linkage);
Linkage parse_linkage(const std::string& name);

struct AggloCut {
  std::optional<int> k;
  std::optional<double> distance_threshold;
};

/// Lance-Williams agglomeration on the full Euclidean distance matrix. Ward
/// merges on squared distances and reports the increase in within-cluster sum
/// of squares. Exactly one of cut.k / cut.distance_threshold must be set.
ClusteringResult agglomerative(const Matrix& X, Linkage linkage, const AggloCut& cut);

MergeTable linkage_tree(const Matrix& X, Linkage linkage);

/// Flat labels after applying merges in table order; labels numbered by
/// first appearance in row order.
std::vector<int> cut_tree(const MergeTable& table, int n, const AggloCut& cut);

// ---------------------------------------------------------------------------

struct GmmOptions {
  double reg = 1e-6;
  double tol = 1e-6;  // on the per-sample log-likelihood gain
  int max_iter = 200;
  int restarts = 5;
};

/// Full-covariance EM, k-means initialised. Throws NumericalError when a
/// covariance is not positive definite after the ridge.
ClusteringResult gmm_em(const Matrix& X, int k, std::uint64_t seed, const GmmOptions& opts = {});

/// n x k posterior membership probabilities.
Matrix gmm_responsibilities(const GmmModel& model, const Matrix& X);
double gmm_log_likelihood(const GmmModel& model, const Matrix& X);

struct BicSelection {
  int k = 0;
  std::vector<int> ks;
  std::vector<double> bic;
};

/// BIC = -2 loglik + p ln n with p = k-1 + kF + kF(F+1)/2; argmin, smallest k on ties.
BicSelection gmm_select_k_bic(const Matrix& X, int k_min, int k_max, std::uint64_t seed,
                              const GmmOptions& opts = {});

// ---------------------------------------------------------------------------

struct MstEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

struct MutualReachability {
  std::vector<double> core_distances;
  std::vector<MstEdge> mst;  // n-1 edges in Prim order
};

/// Core distance: distance to the min_samples-th nearest point counting the
/// point itself. MST by Prim on max(core_a, core_b, d(a, b)).
MutualReachability mutual_reachability_mst(const Matrix& X, int min_samples);

struct HdbscanOptions {
  int min_cluster_size = 15;
  int min_samples = 0;  // 0: same as min_cluster_size
};

/// Clusters chosen by excess-of-mass stability over the condensed tree (the
/// root is never selected). If every point coincides the result is a single
/// cluster when n >= min_cluster_size and all noise otherwise.
ClusteringResult hdbscan(const Matrix& X, const HdbscanOptions& opts = {});

// ---------------------------------------------------------------------------

/// Nearest representative by Euclidean distance, ties to the lower cluster id.
std::vector<int> assign_to_clusters(const ClusteringResult& result, const Matrix& Y);

enum class Algorithm { kmeans, pam, agglomerative, gmm, hdbscan };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

struct ClusterSpec {
  Algorithm algorithm = Algorithm::kmeans;
  int k = 6;
  bool auto_k = false;  // kmeans: elbow; gmm: BIC; others ignore
  int k_min = 1;
  int k_max = 12;
  Linkage linkage = Linkage::ward;
  std::optional<double> distance_threshold;  // agglomerative: replaces k
  HdbscanOptions hdbscan;
  KmeansOptions kmeans;
  GmmOptions gmm;
  std::uint64_t seed = 0;
};

ClusteringResult fit_clusters(const ClusterSpec& spec, const Matrix& X);

// JSON forms used by the plot emitters and run artifacts.
nlohmann::json to_json(const WssCurve& curve);
nlohmann::json to_json(const MergeTable& table);      // [[left, right, distance, size], ...]
nlohmann::json to_json(const CondensedTree& tree);    // [{parent, child, lambda, child_size}, ...]
nlohmann::json to_json(const GmmModel& model);
nlohmann::json to_json(const ClusteringResult& result);

}  // namespace evdetect
