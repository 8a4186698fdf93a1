// Full-covariance Gaussian mixtures fitted by EM.
#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>

#include "evdetect/cluster.hpp"

namespace evdetect {

namespace {

// n x k matrix of log(w_c) + log N(x | mu_c, Sigma_c).
Eigen::MatrixXd weighted_log_density(const GmmModel& model, const Matrix& X) {
  const auto n = X.rows(), F = X.cols();
  const auto k = model.means.rows();
  Eigen::MatrixXd out(n, k);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::LLT<Eigen::MatrixXd> llt(model.covariances[static_cast<std::size_t>(c)]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("gmm: covariance of component " + std::to_string(c) +
                           " is not positive definite; increase reg (currently " + std::to_string(model.reg) + ")");
    const Eigen::MatrixXd L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    const double log_w = std::log(model.weights(c));
    Eigen::MatrixXd centered = (X.rowwise() - model.means.row(c)).transpose();
    llt.matrixL().solveInPlace(centered);
    const Eigen::VectorXd maha = centered.colwise().squaredNorm().transpose();
    out.col(c) = (-0.5 * (maha.array() + log_det + static_cast<double>(F) * log2pi) + log_w).matrix();
  }
  return out;
}

// Row-wise log-sum-exp; fills resp with normalized responsibilities.
double e_step(const GmmModel& model, const Matrix& X, Matrix& resp) {
  const Eigen::MatrixXd logp = weighted_log_density(model, X);
  resp.resize(logp.rows(), logp.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double m = logp.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logp.row(i).array() - m).exp().matrix();
    const double s = e.sum();
    resp.row(i) = e / s;
    total += m + std::log(s);
  }
  return total;
}

void m_step(const Matrix& X, const Matrix& resp, GmmModel& model) {
  const auto n = X.rows(), F = X.cols();
  const auto k = resp.cols();
  const double tiny = 10.0 * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd nk = resp.colwise().sum().transpose().array() + tiny;
  model.weights = nk / nk.sum();
  model.means = (resp.transpose() * X).array().colwise() / nk.array();
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::MatrixXd centered = X.rowwise() - model.means.row(c);
    Eigen::MatrixXd cov = centered.transpose() * (centered.array().colwise() * resp.col(c).array()).matrix() / nk(c);
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += model.reg;
    model.covariances[static_cast<std::size_t>(c)] = std::move(cov);
  }
  (void)n;
  (void)F;
}

struct EmRun {
  GmmModel model;
  Matrix resp;
  double loglik = -std::numeric_limits<double>::infinity();
};

EmRun run_em(const Matrix& X, int k, std::uint64_t init_seed, const GmmOptions& opts) {
  const auto n = X.rows();
  EmRun run;
  run.model.reg = opts.reg;
  run.model.covariances.resize(static_cast<std::size_t>(k));
  KmeansOptions km;
  km.restarts = 1;
  const ClusteringResult init = kmeans(X, k, init_seed, km);
  Matrix hard = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) hard(i, init.labels[static_cast<std::size_t>(i)]) = 1.0;
  m_step(X, hard, run.model);

  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const double ll = e_step(run.model, X, run.resp);
    run.model.loglik_trace.push_back(ll);
    run.loglik = ll;
    if (iter > 0 && (ll - previous) / static_cast<double>(n) < opts.tol) break;
    previous = ll;
    m_step(X, run.resp, run.model);
  }
  return run;
}

}  // namespace

Matrix gmm_responsibilities(const GmmModel& model, const Matrix& X) {
  Matrix resp;
  e_step(model, X, resp);
  return resp;
}

double gmm_log_likelihood(const GmmModel& model, const Matrix& X) {
  Matrix resp;
  return e_step(model, X, resp);
}

ClusteringResult gmm_em(const Matrix& X, int k, std::uint64_t seed, const GmmOptions& opts) {
  const auto n = X.rows();
  if (X.cols() < 1) throw PreconditionError("gmm: need at least one feature");
  if (k < 1 || k > n) throw PreconditionError("gmm: k=" + std::to_string(k) + " must lie in [1, n=" + std::to_string(n) + "]");
  if (opts.restarts < 1 || opts.max_iter < 1) throw PreconditionError("gmm: restarts and max_iter must be >= 1");
  if (!(opts.reg >= 0.0)) throw PreconditionError("gmm: reg must be >= 0");

  EmRun best;
  for (int r = 0; r < opts.restarts; ++r) {
    EmRun run = run_em(X, k, derive_seed(seed, "gmm-restart-" + std::to_string(r)), opts);
    if (r == 0 || run.loglik > best.loglik) best = std::move(run);
  }

  ClusteringResult result;
  result.algorithm = "gmm";
  result.seed = seed;
  result.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg;
    best.resp.row(i).maxCoeff(&arg);
    result.labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  // Components that win no point are left out of the flat labelling.
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  std::vector<bool> used(static_cast<std::size_t>(k), false);
  for (int l : result.labels) used[static_cast<std::size_t>(l)] = true;
  int next = 0;
  for (int c = 0; c < k; ++c)
    if (used[static_cast<std::size_t>(c)]) remap[static_cast<std::size_t>(c)] = next++;
  result.k = next;
  result.representatives.resize(next, X.cols());
  for (int c = 0; c < k; ++c)
    if (remap[static_cast<std::size_t>(c)] >= 0) result.representatives.row(remap[static_cast<std::size_t>(c)]) = best.model.means.row(c);
  for (int& l : result.labels) l = remap[static_cast<std::size_t>(l)];
  result.objective = best.loglik;
  result.objective_trace = best.model.loglik_trace;
  result.extras = std::move(best.model);
  return result;
}

BicSelection gmm_select_k_bic(const Matrix& X, int k_min, int k_max, std::uint64_t seed, const GmmOptions& opts) {
  if (k_min < 1) throw PreconditionError("gmm_select_k_bic: k_min must be >= 1");
  if (k_max < k_min) throw PreconditionError("gmm_select_k_bic: k_max must be >= k_min");
  const double n = static_cast<double>(X.rows());
  const double F = static_cast<double>(X.cols());
  BicSelection out;
  double best = std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const ClusteringResult fit = gmm_em(X, k, seed, opts);
    const double params = (k - 1) + k * F + k * F * (F + 1) / 2.0;
    const double bic = -2.0 * fit.objective + params * std::log(n);
    out.ks.push_back(k);
    out.bic.push_back(bic);
    if (bic < best) {
      best = bic;
      out.k = k;
    }
  }
  return out;
}

}  // namespace evdetect
