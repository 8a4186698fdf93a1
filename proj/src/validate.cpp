#include "evdetect/validate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace evdetect {

namespace {

// Summands are sorted first so the result does not depend on row, cluster or
// partition order (bit-for-bit, not just up to rounding).
double order_free_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// k x F member means; rows of empty clusters are left NaN.
Matrix order_free_means(const Matrix& X, const std::vector<int>& labels, int k) {
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0 && labels[i] < k) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  Matrix out = Matrix::Constant(k, X.cols(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> col;
  for (int c = 0; c < k; ++c) {
    const auto& rows = members[static_cast<std::size_t>(c)];
    if (rows.empty()) continue;
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
      col.clear();
      for (Eigen::Index i : rows) col.push_back(X(i, f));
      out(c, f) = order_free_mean(col);
    }
  }
  return out;
}

}  // namespace

CsaiReport csai(const CsaiInputs& inputs) {
  if (inputs.partitions.empty()) throw PreconditionError("csai: need at least one partition");
  const auto F = inputs.validation.cols();
  if (F < 1) throw PreconditionError("csai: need at least one feature");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  CsaiReport report;
  report.K = static_cast<int>(inputs.partitions.size());
  report.F = static_cast<int>(F);
  std::vector<double> partition_values;

  for (std::size_t j = 0; j < inputs.partitions.size(); ++j) {
    const auto& part = inputs.partitions[j];
    const std::string where = "csai: partition " + std::to_string(j) + ": ";
    const int N = part.clustering.k;
    if (N < 1) throw PreconditionError(where + "clustering has no clusters");
    if (part.training.cols() != F)
      throw PreconditionError(where + "training has " + std::to_string(part.training.cols()) +
                              " columns, validation has " + std::to_string(F));
    if (static_cast<Eigen::Index>(part.clustering.labels.size()) != part.training.rows())
      throw PreconditionError(where + "labels do not match training rows");

    const double t_min = part.training.minCoeff();
    const double t_max = part.training.maxCoeff();
    if (!(t_max > t_min))
      throw PreconditionError(where + "degenerate scale, training matrix is constant (T_max = T_min)");

    for (int l : part.clustering.labels)
      if (l >= N) throw PreconditionError(where + "label " + std::to_string(l) + " out of range");
    const Matrix T = order_free_means(part.training, part.clustering.labels, N);
    const std::vector<int> assigned = assign_to_clusters(part.clustering, inputs.validation);
    const Matrix V_mean = order_free_means(inputs.validation, assigned, N);
    std::vector<int> counts(static_cast<std::size_t>(N), 0);
    for (int a : assigned) ++counts[static_cast<std::size_t>(a)];

    Matrix V(N, F);
    std::vector<std::optional<double>> nrmse(static_cast<std::size_t>(N));
    std::vector<double> scores;
    for (int c = 0; c < N; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        V.row(c).setConstant(nan);
        ++report.skipped_clusters;
        continue;
      }
      V.row(c) = V_mean.row(c);
      if (!T.row(c).allFinite())
        throw PreconditionError(where + "cluster " + std::to_string(c) + " has no training rows");
      std::vector<double> sq;
      for (Eigen::Index f = 0; f < F; ++f) sq.push_back((V(c, f) - T(c, f)) * (V(c, f) - T(c, f)));
      const double rmse = std::sqrt(order_free_mean(std::move(sq)));
      nrmse[static_cast<std::size_t>(c)] = rmse / (t_max - t_min);
      scores.push_back(*nrmse[static_cast<std::size_t>(c)]);
    }
    if (scores.empty()) throw PreconditionError(where + "no cluster received a validation row");

    const double partition_value = order_free_mean(std::move(scores));
    partition_values.push_back(partition_value);
    report.N_per_partition.push_back(N);
    report.T_range.emplace_back(t_min, t_max);
    report.per_cluster_nrmse.push_back(std::move(nrmse));
    report.per_partition_csai.push_back(partition_value);
    report.training_centroids.push_back(T);
    report.validation_centroids.push_back(std::move(V));
  }
  report.csai = order_free_mean(std::move(partition_values));
  return report;
}

namespace {

nlohmann::json matrix_rows(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (std::isnan(m(i, c))) row.push_back(nullptr);
      else row.push_back(m(i, c));
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const CsaiReport& report) {
  nlohmann::json t_range = nlohmann::json::array();
  for (const auto& [lo, hi] : report.T_range) t_range.push_back({{"T_min", lo}, {"T_max", hi}});
  nlohmann::json nrmse = nlohmann::json::array();
  for (const auto& part : report.per_cluster_nrmse) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& v : part) {
      if (v) row.push_back(*v);
      else row.push_back(nullptr);
    }
    nrmse.push_back(std::move(row));
  }
  nlohmann::json train = nlohmann::json::array(), val = nlohmann::json::array();
  for (const auto& m : report.training_centroids) train.push_back(matrix_rows(m));
  for (const auto& m : report.validation_centroids) val.push_back(matrix_rows(m));
  return {{"K", report.K},
          {"N_per_partition", report.N_per_partition},
          {"F", report.F},
          {"T_range", t_range},
          {"per_cluster_nrmse", nrmse},
          {"per_partition_csai", report.per_partition_csai},
          {"csai", report.csai},
          {"skipped_clusters", report.skipped_clusters},
          {"training_centroids", train},
          {"validation_centroids", val}};
}

StabilityProfile stability_profile(const EmbeddingMatrix& embeddings, const ClusterSpec& spec,
                                   const PartitionPlan& plan) {
  if (plan.train_subsets.size() < 2) throw PreconditionError("stability_profile: need K >= 2 partitions");
  CsaiInputs inputs;
  inputs.validation = embeddings.select(plan.validation_ids).values;
  for (const auto& subset : plan.train_subsets) {
    CsaiPartition part;
    part.training = embeddings.select(subset).values;
    part.clustering = fit_clusters(spec, part.training);
    inputs.partitions.push_back(std::move(part));
  }
  StabilityProfile profile;
  profile.report = csai(inputs);
  profile.per_partition_csai = profile.report.per_partition_csai;
  const double K = static_cast<double>(profile.per_partition_csai.size());
  profile.mean = profile.report.csai;
  double ss = 0.0;
  for (double v : profile.per_partition_csai) ss += (v - profile.mean) * (v - profile.mean);
  profile.stddev = std::sqrt(ss / (K - 1.0));
  return profile;
}

nlohmann::json to_json(const StabilityProfile& profile) {
  return {{"per_partition_csai", profile.per_partition_csai},
          {"mean", profile.mean},
          {"stddev", profile.stddev},
          {"report", to_json(profile.report)}};
}

namespace {

// Non-noise rows grouped by label, labels compacted to 0..k-1.
std::vector<std::vector<Eigen::Index>> groups_of(const Matrix& X, const std::vector<int>& labels, const char* who) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows())
    throw PreconditionError(std::string(who) + ": labels do not match rows");
  std::map<int, std::vector<Eigen::Index>> by_label;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l >= 0) by_label[l].push_back(i);
  }
  std::vector<std::vector<Eigen::Index>> groups;
  for (auto& [l, rows] : by_label) groups.push_back(std::move(rows));
  if (groups.size() < 2)
    throw PreconditionError(std::string(who) + ": need at least 2 clusters, got " + std::to_string(groups.size()));
  return groups;
}

}  // namespace

double silhouette(const Matrix& X, const std::vector<int>& labels) {
  const auto groups = groups_of(X, labels, "silhouette");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (Eigen::Index i : groups[g]) {
      ++count;
      if (groups[g].size() == 1) continue;
      double a = 0.0;
      for (Eigen::Index j : groups[g]) a += (X.row(i) - X.row(j)).norm();
      a /= static_cast<double>(groups[g].size() - 1);
      double b = std::numeric_limits<double>::infinity();
      for (std::size_t h = 0; h < groups.size(); ++h) {
        if (h == g) continue;
        double d = 0.0;
        for (Eigen::Index j : groups[h]) d += (X.row(i) - X.row(j)).norm();
        b = std::min(b, d / static_cast<double>(groups[h].size()));
      }
      const double denom = std::max(a, b);
      total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
  }
  return total / static_cast<double>(count);
}

double calinski_harabasz(const Matrix& X, const std::vector<int>& labels) {
  const auto groups = groups_of(X, labels, "calinski_harabasz");
  const auto k = static_cast<double>(groups.size());
  std::size_t n_rows = 0;
  for (const auto& g : groups) n_rows += g.size();
  const auto n = static_cast<double>(n_rows);
  if (groups.size() >= n_rows) throw PreconditionError("calinski_harabasz: need k < n");
  Eigen::RowVectorXd overall = Eigen::RowVectorXd::Zero(X.cols());
  for (const auto& g : groups)
    for (Eigen::Index i : g) overall += X.row(i);
  overall /= n;
  double bcss = 0.0, wcss = 0.0;
  for (const auto& g : groups) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(X.cols());
    for (Eigen::Index i : g) mean += X.row(i);
    mean /= static_cast<double>(g.size());
    bcss += static_cast<double>(g.size()) * (mean - overall).squaredNorm();
    for (Eigen::Index i : g) wcss += (X.row(i) - mean).squaredNorm();
  }
  if (wcss == 0.0) return std::numeric_limits<double>::infinity();
  return (bcss / (k - 1.0)) / (wcss / (n - k));
}

}  // namespace evdetect
