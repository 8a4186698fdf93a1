// k-means, elbow selection, PAM, and nearest-representative assignment.
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evdetect/cluster.hpp"
#include "evdetect/rng.hpp"

namespace evdetect {

double within_cluster_ss(const Matrix& X, const std::vector<int>& labels, const Matrix& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c >= 0) total += (X.row(i) - centroids.row(c)).squaredNorm();
  }
  return total;
}

Matrix cluster_means(const Matrix& X, const std::vector<int>& labels, int k) {
  Matrix means = Matrix::Zero(k, X.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0) continue;
    means.row(c) += X.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) means.row(c) /= counts[static_cast<std::size_t>(c)];
  }
  return means;
}

namespace {

int nearest_row(const Matrix& centers, const Eigen::Ref<const Eigen::RowVectorXd>& x, double* dist2) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

Matrix kmeans_pp(const Matrix& X, int k, Rng& rng) {
  const auto n = X.rows();
  Matrix centers(k, X.cols());
  centers.row(0) = X.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (X.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double running = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        running += d2[static_cast<std::size_t>(i)];
        if (running > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (X.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

struct LloydRun {
  Matrix centers;
  std::vector<int> labels;
  double wss = 0.0;
  std::vector<double> trace;
};

LloydRun lloyd(const Matrix& X, Matrix centers, const KmeansOptions& opts) {
  const auto n = X.rows();
  const auto k = centers.rows();
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    double wss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      run.labels[static_cast<std::size_t>(i)] = nearest_row(centers, X.row(i), &dist[static_cast<std::size_t>(i)]);
      wss += dist[static_cast<std::size_t>(i)];
    }
    run.trace.push_back(wss);

    Matrix updated = Matrix::Zero(k, X.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      updated.row(run.labels[static_cast<std::size_t>(i)]) += X.row(i);
      ++counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) updated.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      // Empty cluster: take the point farthest from its centroid among clusters that can spare one.
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int owner = run.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(owner)] <= 1) continue;
        const double d = (X.row(i) - updated.row(owner)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      const int owner = run.labels[static_cast<std::size_t>(far)];
      updated.row(owner) = (updated.row(owner) * counts[static_cast<std::size_t>(owner)] - X.row(far)) /
                           (counts[static_cast<std::size_t>(owner)] - 1);
      --counts[static_cast<std::size_t>(owner)];
      run.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
      counts[static_cast<std::size_t>(c)] = 1;
      updated.row(c) = X.row(far);
    }
    const double shift = (updated - centers).rowwise().norm().maxCoeff();
    centers = std::move(updated);
    if (shift < opts.tol) break;
  }
  double wss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d;
    run.labels[static_cast<std::size_t>(i)] = nearest_row(centers, X.row(i), &d);
    wss += d;
  }
  // Exact centroids for the final assignment, so representatives are the member means.
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : run.labels) ++counts[static_cast<std::size_t>(l)];
  Matrix means = cluster_means(X, run.labels, static_cast<int>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = means.row(c);
  }
  run.wss = within_cluster_ss(X, run.labels, centers);
  run.trace.push_back(std::min(wss, run.wss));
  run.centers = std::move(centers);
  return run;
}

// Renumbers labels by first appearance and drops clusters left without members.
void compact_labels(std::vector<int>& labels, Matrix& centers) {
  std::vector<int> remap(static_cast<std::size_t>(centers.rows()), -1);
  int next = 0;
  for (int& l : labels) {
    if (l < 0) continue;
    if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = next++;
    l = remap[static_cast<std::size_t>(l)];
  }
  Matrix out(next, centers.cols());
  for (std::size_t c = 0; c < remap.size(); ++c) {
    if (remap[c] >= 0) out.row(remap[c]) = centers.row(static_cast<Eigen::Index>(c));
  }
  centers = std::move(out);
}

}  // namespace

ClusteringResult kmeans(const Matrix& X, int k, std::uint64_t seed, const KmeansOptions& opts) {
  const auto n = X.rows();
  if (n < 1) throw PreconditionError("kmeans: empty data");
  if (k < 1 || k > n)
    throw PreconditionError("kmeans: k=" + std::to_string(k) + " must lie in [1, n=" + std::to_string(n) + "]");
  if (opts.restarts < 1 || opts.max_iter < 1) throw PreconditionError("kmeans: restarts and max_iter must be >= 1");
  Rng rng(seed);
  LloydRun best;
  bool have = false;
  for (int r = 0; r < opts.restarts; ++r) {
    LloydRun run = lloyd(X, kmeans_pp(X, k, rng), opts);
    if (!have || run.wss < best.wss) {
      best = std::move(run);
      have = true;
    }
  }
  ClusteringResult result;
  result.algorithm = "kmeans";
  result.seed = seed;
  result.labels = std::move(best.labels);
  result.representatives = std::move(best.centers);
  compact_labels(result.labels, result.representatives);
  result.k = static_cast<int>(result.representatives.rows());
  result.objective = best.wss;
  result.objective_trace = std::move(best.trace);
  return result;
}

WssCurve choose_elbow(const std::vector<int>& ks, const std::vector<double>& wss) {
  if (ks.size() != wss.size() || ks.size() < 2) throw PreconditionError("choose_elbow: need >= 2 points");
  WssCurve curve{ks, wss, ks.front(), false};
  const double x0 = ks.front(), y0 = wss.front(), x1 = ks.back(), y1 = wss.back();
  const double dx = x1 - x0, dy = y1 - y0;
  const double chord = std::hypot(dx, dy);
  double best = -1.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double d = std::abs(dy * (ks[i] - x0) - dx * (wss[i] - y0)) / chord;
    if (d > best) {
      best = d;
      curve.chosen_k = ks[i];
    }
  }
  const double scale = std::max({std::abs(y0), std::abs(y1), 1.0});
  if (best <= 1e-12 * scale) {
    curve.flat = true;
    curve.chosen_k = ks.front();
  }
  return curve;
}

WssCurve elbow_select_k(const Matrix& X, int k_min, int k_max, std::uint64_t seed, const KmeansOptions& opts) {
  if (k_min < 1) throw PreconditionError("elbow_select_k: k_min must be >= 1");
  if (k_min >= k_max) throw PreconditionError("elbow_select_k: k_min must be < k_max");
  if (k_max > X.rows()) throw PreconditionError("elbow_select_k: k_max exceeds n");
  std::vector<int> ks;
  std::vector<double> wss;
  for (int k = k_min; k <= k_max; ++k) {
    ks.push_back(k);
    wss.push_back(kmeans(X, k, seed, opts).objective);
  }
  return choose_elbow(ks, wss);
}

// ---------------------------------------------------------------------------

ClusteringResult pam(const Matrix& X, int k, std::uint64_t seed) {
  const auto n = static_cast<int>(X.rows());
  if (n < 1) throw PreconditionError("pam: empty data");
  if (k < 1 || k > n) throw PreconditionError("pam: k=" + std::to_string(k) + " must lie in [1, n=" + std::to_string(n) + "]");
  Eigen::MatrixXd D(n, n);
  for (int i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) D(i, j) = D(j, i) = (X.row(i) - X.row(j)).norm();
  }

  std::vector<int> medoids;
  std::vector<bool> is_medoid(static_cast<std::size_t>(n), false);
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

  // BUILD
  {
    int first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double total = D.row(i).sum();
      if (total < best) {
        best = total;
        first = i;
      }
    }
    medoids.push_back(first);
    is_medoid[static_cast<std::size_t>(first)] = true;
    for (int j = 0; j < n; ++j) nearest[static_cast<std::size_t>(j)] = D(j, first);
  }
  while (static_cast<int>(medoids.size()) < k) {
    int pick = -1;
    double best_gain = -1.0;
    for (int i = 0; i < n; ++i) {
      if (is_medoid[static_cast<std::size_t>(i)]) continue;
      double gain = 0.0;
      for (int j = 0; j < n; ++j) gain += std::max(0.0, nearest[static_cast<std::size_t>(j)] - D(j, i));
      if (gain > best_gain) {
        best_gain = gain;
        pick = i;
      }
    }
    medoids.push_back(pick);
    is_medoid[static_cast<std::size_t>(pick)] = true;
    for (int j = 0; j < n; ++j) nearest[static_cast<std::size_t>(j)] = std::min(nearest[static_cast<std::size_t>(j)], D(j, pick));
  }

  auto total_cost = [&] {
    double cost = 0.0;
    for (int j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (int m : medoids) best = std::min(best, D(j, m));
      cost += best;
    }
    return cost;
  };

  std::vector<double> trace{total_cost()};
  const double eps = 1e-12 * std::max(1.0, trace.front());

  // SWAP
  std::vector<double> d1(static_cast<std::size_t>(n)), d2(static_cast<std::size_t>(n));
  std::vector<int> owner(static_cast<std::size_t>(n));
  for (int iteration = 0; iteration < 10000; ++iteration) {
    for (int j = 0; j < n; ++j) {
      double a = std::numeric_limits<double>::infinity(), b = a;
      int who = -1;
      for (std::size_t m = 0; m < medoids.size(); ++m) {
        const double d = D(j, medoids[m]);
        if (d < a) {
          b = a;
          a = d;
          who = static_cast<int>(m);
        } else if (d < b) {
          b = d;
        }
      }
      d1[static_cast<std::size_t>(j)] = a;
      d2[static_cast<std::size_t>(j)] = b;
      owner[static_cast<std::size_t>(j)] = who;
    }
    double best_delta = 0.0;
    int best_m = -1, best_o = -1;
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      for (int o = 0; o < n; ++o) {
        if (is_medoid[static_cast<std::size_t>(o)]) continue;
        double delta = 0.0;
        for (int j = 0; j < n; ++j) {
          const double djo = D(j, o);
          const auto uj = static_cast<std::size_t>(j);
          delta += owner[uj] == static_cast<int>(m) ? std::min(djo, d2[uj]) - d1[uj]
                                                    : std::min(djo, d1[uj]) - d1[uj];
        }
        if (delta < best_delta - eps) {
          best_delta = delta;
          best_m = static_cast<int>(m);
          best_o = o;
        }
      }
    }
    if (best_m < 0) break;
    is_medoid[static_cast<std::size_t>(medoids[static_cast<std::size_t>(best_m)])] = false;
    medoids[static_cast<std::size_t>(best_m)] = best_o;
    is_medoid[static_cast<std::size_t>(best_o)] = true;
    trace.push_back(total_cost());
  }

  std::sort(medoids.begin(), medoids.end());
  ClusteringResult result;
  result.algorithm = "pam";
  result.seed = seed;
  result.k = k;
  result.representatives.resize(k, X.cols());
  for (int c = 0; c < k; ++c) result.representatives.row(c) = X.row(medoids[static_cast<std::size_t>(c)]);
  result.labels.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (D(j, medoids[static_cast<std::size_t>(c)]) < D(j, medoids[static_cast<std::size_t>(best)])) best = c;
    }
    result.labels[static_cast<std::size_t>(j)] = best;
  }
  // Medoid rows always label themselves, even when duplicates tie.
  for (int c = 0; c < k; ++c) result.labels[static_cast<std::size_t>(medoids[static_cast<std::size_t>(c)])] = c;
  result.objective = trace.back();
  result.objective_trace = std::move(trace);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<int> assign_to_clusters(const ClusteringResult& result, const Matrix& Y) {
  if (result.k < 1 || result.representatives.rows() != result.k)
    throw PreconditionError("assign_to_clusters: clustering has no assignable clusters");
  if (Y.cols() != result.representatives.cols())
    throw PreconditionError("assign_to_clusters: expected " + std::to_string(result.representatives.cols()) +
                            " columns, got " + std::to_string(Y.cols()));
  std::vector<int> labels(static_cast<std::size_t>(Y.rows()));
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    labels[static_cast<std::size_t>(i)] = nearest_row(result.representatives, Y.row(i), nullptr);
  return labels;
}

}  // namespace evdetect
