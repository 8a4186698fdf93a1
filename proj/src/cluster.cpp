#include "evdetect/cluster.hpp"

namespace evdetect {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kmeans: return "kmeans";
    case Algorithm::pam: return "pam";
    case Algorithm::agglomerative: return "agglomerative";
    case Algorithm::gmm: return "gmm";
    case Algorithm::hdbscan: return "hdbscan";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "kmeans") return Algorithm::kmeans;
  if (name == "pam" || name == "kmedoids") return Algorithm::pam;
  if (name == "agglomerative") return Algorithm::agglomerative;
  if (name == "gmm") return Algorithm::gmm;
  if (name == "hdbscan") return Algorithm::hdbscan;
  throw ConfigError("unknown clustering algorithm \"" + name +
                    "\" (expected kmeans, pam, agglomerative, gmm or hdbscan)");
}

ClusteringResult fit_clusters(const ClusterSpec& spec, const Matrix& X) {
  const int n = static_cast<int>(X.rows());
  switch (spec.algorithm) {
    case Algorithm::kmeans: {
      if (spec.auto_k) {
        WssCurve curve = elbow_select_k(X, spec.k_min, std::min(spec.k_max, n), spec.seed, spec.kmeans);
        ClusteringResult r = kmeans(X, curve.chosen_k, spec.seed, spec.kmeans);
        r.extras = std::move(curve);
        return r;
      }
      return kmeans(X, spec.k, spec.seed, spec.kmeans);
    }
    case Algorithm::pam:
      return pam(X, spec.k, spec.seed);
    case Algorithm::agglomerative: {
      AggloCut cut;
      if (spec.distance_threshold) cut.distance_threshold = spec.distance_threshold;
      else cut.k = spec.k;
      ClusteringResult r = agglomerative(X, spec.linkage, cut);
      r.seed = spec.seed;
      return r;
    }
    case Algorithm::gmm: {
      int k = spec.k;
      if (spec.auto_k) k = gmm_select_k_bic(X, spec.k_min, std::min(spec.k_max, n), spec.seed, spec.gmm).k;
      return gmm_em(X, k, spec.seed, spec.gmm);
    }
    case Algorithm::hdbscan: {
      ClusteringResult r = hdbscan(X, spec.hdbscan);
      r.seed = spec.seed;
      return r;
    }
  }
  throw ConfigError("unknown clustering algorithm");
}

nlohmann::json to_json(const WssCurve& curve) {
  return {{"ks", curve.ks}, {"wss", curve.wss}, {"chosen_k", curve.chosen_k}, {"flat", curve.flat}};
}

nlohmann::json to_json(const MergeTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) rows.push_back({r.left, r.right, r.distance, r.size});
  return rows;
}

nlohmann::json to_json(const CondensedTree& tree) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : tree.rows)
    rows.push_back({{"parent", r.parent}, {"child", r.child}, {"lambda", r.lambda}, {"child_size", r.child_size}});
  return rows;
}

namespace {

nlohmann::json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    out.push_back(row);
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const GmmModel& model) {
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& c : model.covariances) covs.push_back(matrix_json(c));
  return {{"weights", std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size())},
          {"means", matrix_json(model.means)},
          {"covariances", covs},
          {"loglik_trace", model.loglik_trace},
          {"reg", model.reg}};
}

nlohmann::json to_json(const ClusteringResult& result) {
  nlohmann::json j = {{"algorithm", result.algorithm},
                      {"k", result.k},
                      {"seed", result.seed},
                      {"labels", result.labels},
                      {"representatives", matrix_json(result.representatives)},
                      {"objective", result.objective},
                      {"objective_trace", result.objective_trace}};
  std::visit(
      [&](const auto& extra) {
        using T = std::decay_t<decltype(extra)>;
        if constexpr (std::is_same_v<T, WssCurve>) {
          j["extras"] = {{"type", "wss_curve"}, {"data", to_json(extra)}};
        } else if constexpr (std::is_same_v<T, MergeTable>) {
          j["extras"] = {{"type", "merge_table"}, {"data", to_json(extra)}};
        } else if constexpr (std::is_same_v<T, GmmModel>) {
          j["extras"] = {{"type", "gmm_model"}, {"data", to_json(extra)}};
        } else if constexpr (std::is_same_v<T, CondensedTree>) {
          nlohmann::json stability = nlohmann::json::object();
          for (const auto& [id, s] : extra.stability) stability[std::to_string(id)] = s;
          j["extras"] = {{"type", "condensed_tree"},
                         {"data", to_json(extra)},
                         {"n_points", extra.n_points},
                         {"stability", stability},
                         {"selected", extra.selected}};
        } else {
          j["extras"] = nullptr;
        }
      },
      result.extras);
  return j;
}

}  // namespace evdetect
