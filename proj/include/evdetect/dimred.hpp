#pragma once

#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

#include "evdetect/common.hpp"

namespace evdetect {

struct PcaModel {
  Vector mean;                // F
  Matrix components;          // d x F, orthonormal rows
  Vector explained_variance;  // d, non-increasing, sample covariance eigenvalues
  double total_variance = 0.0;

  Vector explained_variance_ratio() const;
};

/// Thin SVD of the mean-centered data. Each component's largest-magnitude
/// coordinate is made positive. Requires 1 <= d <= min(n, F).
PcaModel pca_fit(const Matrix& X, int d);

/// (x - mean) * components^T, row-wise.
Matrix pca_transform(const PcaModel& model, const Matrix& X);

struct CurveParams {
  double a = 0.0;
  double b = 0.0;
};

/// Least-squares fit of 1 / (1 + a x^(2b)) to the target curve that is 1 for
/// x <= min_dist and exp(-(x - min_dist) / spread) beyond, sampled at 300
/// evenly spaced points on [0, 3 * spread]. Levenberg-Marquardt from (1, 1).
CurveParams fit_curve_params(double min_dist, double spread = 1.0);

std::vector<double> curve_fit_grid(double spread = 1.0);

struct UmapParams {
  int n_neighbors = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  int n_components = 2;
  int n_epochs = 200;
  int negative_sample_rate = 5;
  std::uint64_t seed = 42;
  // Curve parameters; when both are <= 0 they are fitted from min_dist.
  double a = 0.0;
  double b = 0.0;
};

struct KnnGraph {
  std::vector<std::vector<int>> indices;       // n x k, nearest first, self excluded
  std::vector<std::vector<double>> distances;  // n x k
};

/// Exact k nearest neighbors by Euclidean distance; ties by lower index.
KnnGraph exact_knn(const Matrix& X, int k);

struct SmoothKnn {
  std::vector<double> rho;
  std::vector<double> sigma;
  std::vector<double> residual;  // |sum exp(-max(0, d - rho) / sigma) - log2(k)|
};

/// Per point: rho = nearest-neighbor distance; sigma by bisection (at most 64
/// steps, stopping at |residual| < 1e-5).
SmoothKnn smooth_knn(const KnnGraph& knn);

/// Directed memberships exp(-max(0, d - rho) / sigma), symmetrized as
/// A + A^T - A o A^T.
Eigen::SparseMatrix<double> fuzzy_simplicial_set(const KnnGraph& knn, const SmoothKnn& smooth);

struct UmapDiagnostics {
  SmoothKnn smooth;
  Eigen::SparseMatrix<double> graph;
  bool spectral_init = false;
  CurveParams curve;
};

/// Deterministic single-threaded UMAP layout. Requires n > n_neighbors.
Matrix umap_fit_transform(const Matrix& X, const UmapParams& params,
                          UmapDiagnostics* diagnostics = nullptr);

}  // namespace evdetect
