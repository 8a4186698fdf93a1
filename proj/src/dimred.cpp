#include "evdetect/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evdetect/rng.hpp"

namespace evdetect {

Vector PcaModel::explained_variance_ratio() const {
  if (total_variance <= 0.0) return Vector::Zero(explained_variance.size());
  return explained_variance / total_variance;
}

PcaModel pca_fit(const Matrix& X, int d) {
  const auto n = X.rows(), F = X.cols();
  if (n < 1 || F < 1) throw PreconditionError("pca_fit: empty matrix");
  if (d < 1 || d > std::min(n, F))
    throw PreconditionError("pca_fit: d=" + std::to_string(d) + " outside [1, min(n, F)=" +
                            std::to_string(std::min(n, F)) + "]");
  PcaModel model;
  model.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const double dof = static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  const Vector& s = svd.singularValues();
  model.components = svd.matrixV().leftCols(d).transpose();
  model.explained_variance = s.head(d).array().square() / dof;
  model.total_variance = s.array().square().sum() / dof;
  for (int r = 0; r < d; ++r) {
    Eigen::Index arg;
    model.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (model.components(r, arg) < 0) model.components.row(r) *= -1.0;
  }
  return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& X) {
  if (X.cols() != model.mean.size())
    throw PreconditionError("pca_transform: expected " + std::to_string(model.mean.size()) +
                            " columns, got " + std::to_string(X.cols()));
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

// ---------------------------------------------------------------------------

std::vector<double> curve_fit_grid(double spread) {
  constexpr int kPoints = 300;
  std::vector<double> xs(kPoints);
  for (int i = 0; i < kPoints; ++i) xs[i] = 3.0 * spread * i / (kPoints - 1);
  return xs;
}

CurveParams fit_curve_params(double min_dist, double spread) {
  if (min_dist < 0) throw PreconditionError("fit_curve_params: min_dist must be >= 0");
  if (spread <= 0) throw PreconditionError("fit_curve_params: spread must be > 0");
  const auto xs = curve_fit_grid(spread);
  std::vector<double> ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    ys[i] = xs[i] <= min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);

  auto sse = [&](double a, double b) {
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b)) - ys[i];
      total += r * r;
    }
    return total;
  };

  double a = 1.0, b = 1.0, lambda = 1e-3;
  double cost = sse(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double x = xs[i];
      const double u = x > 0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * u;
      const double r = 1.0 / denom - ys[i];
      const double da = -u / (denom * denom);
      const double db = x > 0 ? -a * u * 2.0 * std::log(x) / (denom * denom) : 0.0;
      jtj(0, 0) += da * da;
      jtj(0, 1) += da * db;
      jtj(1, 1) += db * db;
      jtr(0) += da * r;
      jtr(1) += db * r;
    }
    jtj(1, 0) = jtj(0, 1);
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      Eigen::Matrix2d damped = jtj;
      damped.diagonal() *= 1.0 + lambda;
      const Eigen::Vector2d step = damped.ldlt().solve(-jtr);
      const double na = a + step(0), nb = b + step(1);
      if (na > 0 && nb > 0) {
        const double new_cost = sse(na, nb);
        if (new_cost < cost) {
          const double rel = (cost - new_cost) / std::max(cost, 1e-300);
          a = na;
          b = nb;
          cost = new_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          improved = true;
          if (rel < 1e-14) return {a, b};
          continue;
        }
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return {a, b};
}

// ---------------------------------------------------------------------------

KnnGraph exact_knn(const Matrix& X, int k) {
  const auto n = static_cast<int>(X.rows());
  if (k < 1 || k >= n) throw PreconditionError("exact_knn: need 1 <= k < n");
  KnnGraph g;
  g.indices.resize(n);
  g.distances.resize(n);
  std::vector<std::pair<double, int>> row(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      row[c++] = {(X.row(i) - X.row(j)).squaredNorm(), j};
    }
    std::partial_sort(row.begin(), row.begin() + k, row.end());
    for (int r = 0; r < k; ++r) {
      g.indices[i].push_back(row[r].second);
      g.distances[i].push_back(std::sqrt(row[r].first));
    }
  }
  return g;
}

SmoothKnn smooth_knn(const KnnGraph& knn) {
  const std::size_t n = knn.indices.size();
  SmoothKnn out;
  out.rho.resize(n);
  out.sigma.resize(n);
  out.residual.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = knn.distances[i];
    const double target = std::log2(static_cast<double>(d.size()));
    const double rho = d.front();
    auto mass = [&](double sigma) {
      double s = 0.0;
      for (double dist : d) s += std::exp(-std::max(0.0, dist - rho) / sigma);
      return s;
    };
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    double psum = mass(mid);
    for (int iter = 0; iter < 64; ++iter) {
      psum = mass(mid);
      if (std::abs(psum - target) < 1e-5) break;
      if (psum > target) {
        hi = mid;
        mid = 0.5 * (lo + hi);
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
      }
    }
    psum = mass(mid);
    out.rho[i] = rho;
    out.sigma[i] = mid;
    out.residual[i] = std::abs(psum - target);
  }
  return out;
}

Eigen::SparseMatrix<double> fuzzy_simplicial_set(const KnnGraph& knn, const SmoothKnn& smooth) {
  const auto n = static_cast<Eigen::Index>(knn.indices.size());
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t r = 0; r < knn.indices[ui].size(); ++r) {
      const double w =
          std::exp(-std::max(0.0, knn.distances[ui][r] - smooth.rho[ui]) / smooth.sigma[ui]);
      if (w > 0.0) triplets.emplace_back(i, knn.indices[ui][r], w);
    }
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> At = A.transpose();
  Eigen::SparseMatrix<double> prod = A.cwiseProduct(At);
  Eigen::SparseMatrix<double> W = A + At - prod;
  W.prune(0.0);
  W.makeCompressed();
  return W;
}

namespace {

// Eigenvectors 1..dim of the normalized Laplacian I - D^-1/2 W D^-1/2
// (skipping the trivial one). Dense solve for moderate n, otherwise block
// subspace iteration on I + D^-1/2 W D^-1/2. Returns false on failure.
bool spectral_layout(const Eigen::SparseMatrix<double>& W, int dim, Rng& rng, Matrix& out) {
  const auto n = W.rows();
  Vector degree = Vector::Zero(n);
  for (Eigen::Index c = 0; c < W.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(W, c); it; ++it) degree[it.row()] += it.value();
  if ((degree.array() <= 0).any()) return false;
  const Vector inv_sqrt = degree.array().rsqrt();
  Eigen::SparseMatrix<double> S = inv_sqrt.asDiagonal() * W * inv_sqrt.asDiagonal();
  const int want = dim + 1;
  if (want >= n) return false;

  Eigen::MatrixXd vectors;
  if (n <= 2000) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd(S);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
    if (eig.info() != Eigen::Success) return false;
    vectors = eig.eigenvectors().leftCols(want);  // ascending eigenvalues
  } else {
    const int block = std::min<int>(static_cast<int>(n) - 1, want + 8);
    Eigen::MatrixXd Q(n, block);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j < block; ++j) Q(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Q);
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    Vector prev = Vector::Zero(want);
    bool converged = false;
    for (int iter = 0; iter < 2000 && !converged; ++iter) {
      Eigen::MatrixXd Z = Q + S * Q;  // (I + S) Q; eigenvalues in [0, 2]
      Eigen::HouseholderQR<Eigen::MatrixXd> step(Z);
      Q = step.householderQ() * Eigen::MatrixXd::Identity(n, block);
      if (iter % 10 == 9) {
        Eigen::MatrixXd H = Q.transpose() * (Q + S * Q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(H);
        const Vector top = small.eigenvalues().reverse().head(want);
        converged = (top - prev).cwiseAbs().maxCoeff() < 1e-10;
        prev = top;
      }
    }
    if (!converged) return false;
    Eigen::MatrixXd H = Q.transpose() * (Q + S * Q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(H);
    vectors = (Q * small.eigenvectors()).rowwise().reverse().leftCols(want);
  }
  out = vectors.middleCols(1, dim);
  return out.allFinite();
}

}  // namespace

Matrix umap_fit_transform(const Matrix& X, const UmapParams& p, UmapDiagnostics* diagnostics) {
  const auto n = static_cast<int>(X.rows());
  if (p.n_neighbors < 2) throw PreconditionError("umap: n_neighbors must be >= 2");
  if (n <= p.n_neighbors)
    throw PreconditionError("umap: need more points (" + std::to_string(n) +
                            ") than n_neighbors (" + std::to_string(p.n_neighbors) + ")");
  if (p.n_components < 1) throw PreconditionError("umap: n_components must be >= 1");
  if (p.n_epochs < 1) throw PreconditionError("umap: n_epochs must be >= 1");
  if (p.min_dist < 0) throw PreconditionError("umap: min_dist must be >= 0");

  CurveParams curve{p.a, p.b};
  if (curve.a <= 0 || curve.b <= 0) curve = fit_curve_params(p.min_dist, p.spread);

  const KnnGraph knn = exact_knn(X, p.n_neighbors);
  SmoothKnn smooth = smooth_knn(knn);
  Eigen::SparseMatrix<double> graph = fuzzy_simplicial_set(knn, smooth);

  Rng rng(p.seed);
  const int dim = p.n_components;
  Matrix embedding(n, dim);
  Matrix spectral;
  const bool spectral_ok = spectral_layout(graph, dim, rng, spectral);
  if (spectral_ok) {
    const double max_abs = spectral.cwiseAbs().maxCoeff();
    const double expansion = max_abs > 0 ? 10.0 / max_abs : 1.0;
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) embedding(i, d) = spectral(i, d) * expansion + rng.normal(0.0, 1e-4);
  } else {
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) embedding(i, d) = rng.uniform(-10.0, 10.0);
  }
  for (int d = 0; d < dim; ++d) {
    const double lo = embedding.col(d).minCoeff(), hi = embedding.col(d).maxCoeff();
    const double range = hi > lo ? hi - lo : 1.0;
    embedding.col(d) = (10.0 * (embedding.col(d).array() - lo) / range).matrix();
  }

  // Edge list in column-major order of the symmetric graph (both directions).
  struct Edge {
    int head, tail;
    double weight;
  };
  std::vector<Edge> edges;
  double max_w = 0.0;
  for (Eigen::Index c = 0; c < graph.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph, c); it; ++it) {
      edges.push_back({static_cast<int>(it.row()), static_cast<int>(it.col()), it.value()});
      max_w = std::max(max_w, it.value());
    }
  const double floor_w = max_w / p.n_epochs;
  std::erase_if(edges, [&](const Edge& e) { return e.weight < floor_w; });

  const std::size_t m = edges.size();
  std::vector<double> epochs_per_sample(m), next_sample(m), per_negative(m), next_negative(m);
  for (std::size_t e = 0; e < m; ++e) {
    epochs_per_sample[e] = max_w / edges[e].weight;
    next_sample[e] = epochs_per_sample[e];
    per_negative[e] = epochs_per_sample[e] / p.negative_sample_rate;
    next_negative[e] = per_negative[e];
  }

  const double a = curve.a, b = curve.b;
  auto clip = [](double v) { return std::clamp(v, -4.0, 4.0); };
  for (int epoch = 0; epoch < p.n_epochs; ++epoch) {
    const double alpha = 1.0 - static_cast<double>(epoch) / p.n_epochs;
    for (std::size_t e = 0; e < m; ++e) {
      if (next_sample[e] > epoch) continue;
      const int j = edges[e].head, k = edges[e].tail;
      double dist2 = (embedding.row(j) - embedding.row(k)).squaredNorm();
      double coeff = 0.0;
      if (dist2 > 0.0) {
        coeff = -2.0 * a * b * std::pow(dist2, b - 1.0) / (a * std::pow(dist2, b) + 1.0);
      }
      for (int d = 0; d < dim; ++d) {
        const double g = clip(coeff * (embedding(j, d) - embedding(k, d)));
        embedding(j, d) += g * alpha;
        embedding(k, d) -= g * alpha;
      }
      next_sample[e] += epochs_per_sample[e];

      const int n_neg = static_cast<int>((epoch - next_negative[e]) / per_negative[e]);
      for (int s = 0; s < n_neg; ++s) {
        const auto other = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        dist2 = (embedding.row(j) - embedding.row(other)).squaredNorm();
        if (dist2 > 0.0) {
          coeff = 2.0 * b / ((0.001 + dist2) * (a * std::pow(dist2, b) + 1.0));
        } else if (j == other) {
          continue;
        } else {
          coeff = 0.0;
        }
        for (int d = 0; d < dim; ++d) {
          const double g = coeff > 0.0 ? clip(coeff * (embedding(j, d) - embedding(other, d))) : 4.0;
          embedding(j, d) += g * alpha;
        }
      }
      next_negative[e] += n_neg * per_negative[e];
    }
  }

  if (diagnostics) {
    diagnostics->smooth = std::move(smooth);
    diagnostics->graph = std::move(graph);
    diagnostics->spectral_init = spectral_ok;
    diagnostics->curve = curve;
  }
  return embedding;
}

}  // namespace evdetect
