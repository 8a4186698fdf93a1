// Agglomerative clustering over a full distance matrix.
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evdetect/cluster.hpp"

namespace evdetect {

std::string to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
    case Linkage::ward: return "ward";
  }
  return "?";
}

Linkage parse_linkage(const std::string& name) {
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  if (name == "ward") return Linkage::ward;
  throw ConfigError("unknown linkage \"" + name + "\" (expected single, complete, average or ward)");
}

MergeTable linkage_tree(const Matrix& X, Linkage linkage) {
  const int n = static_cast<int>(X.rows());
  if (n < 2) throw PreconditionError("agglomerative: need n >= 2, got " + std::to_string(n));
  const bool ward = linkage == Linkage::ward;
  const double inf = std::numeric_limits<double>::infinity();

  Eigen::MatrixXd D(n, n);
  for (int i = 0; i < n; ++i) {
    D(i, i) = inf;
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (X.row(i) - X.row(j)).squaredNorm();
      D(i, j) = D(j, i) = ward ? d2 : std::sqrt(d2);
    }
  }

  std::vector<int> id(static_cast<std::size_t>(n)), size(static_cast<std::size_t>(n), 1);
  std::iota(id.begin(), id.end(), 0);
  std::vector<bool> active(static_cast<std::size_t>(n), true);
  // Per-slot nearest active slot with a larger index.
  std::vector<int> nn(static_cast<std::size_t>(n), -1);
  std::vector<double> nn_d(static_cast<std::size_t>(n), inf);
  auto refresh = [&](int i) {
    nn[static_cast<std::size_t>(i)] = -1;
    nn_d[static_cast<std::size_t>(i)] = inf;
    for (int j = i + 1; j < n; ++j) {
      if (active[static_cast<std::size_t>(j)] && D(i, j) < nn_d[static_cast<std::size_t>(i)]) {
        nn_d[static_cast<std::size_t>(i)] = D(i, j);
        nn[static_cast<std::size_t>(i)] = j;
      }
    }
  };
  for (int i = 0; i < n; ++i) refresh(i);

  MergeTable table;
  table.rows.reserve(static_cast<std::size_t>(n - 1));
  for (int step = 0; step < n - 1; ++step) {
    int a = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)] || nn[static_cast<std::size_t>(i)] < 0) continue;
      if (a < 0 || nn_d[static_cast<std::size_t>(i)] < nn_d[static_cast<std::size_t>(a)]) a = i;
    }
    const int b = nn[static_cast<std::size_t>(a)];
    const double dab = D(a, b);
    const int na = size[static_cast<std::size_t>(a)], nb = size[static_cast<std::size_t>(b)];

    MergeStep row;
    row.left = std::min(id[static_cast<std::size_t>(a)], id[static_cast<std::size_t>(b)]);
    row.right = std::max(id[static_cast<std::size_t>(a)], id[static_cast<std::size_t>(b)]);
    row.distance = ward ? dab / 2.0 : dab;
    row.size = na + nb;
    table.rows.push_back(row);

    // Lance-Williams: the merged cluster lives in slot a, slot b retires.
    for (int c = 0; c < n; ++c) {
      if (!active[static_cast<std::size_t>(c)] || c == a || c == b) continue;
      const double dac = D(a, c), dbc = D(b, c);
      double merged = 0.0;
      switch (linkage) {
        case Linkage::single: merged = std::min(dac, dbc); break;
        case Linkage::complete: merged = std::max(dac, dbc); break;
        case Linkage::average: merged = (na * dac + nb * dbc) / (na + nb); break;
        case Linkage::ward: {
          const double nc = size[static_cast<std::size_t>(c)];
          merged = ((na + nc) * dac + (nb + nc) * dbc - nc * dab) / (na + nb + nc);
          break;
        }
      }
      D(a, c) = D(c, a) = merged;
    }
    active[static_cast<std::size_t>(b)] = false;
    size[static_cast<std::size_t>(a)] = na + nb;
    id[static_cast<std::size_t>(a)] = n + step;

    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      const int cached = nn[static_cast<std::size_t>(i)];
      if (i == a || cached == a || cached == b) {
        refresh(i);
      } else if (i < a && D(i, a) < nn_d[static_cast<std::size_t>(i)]) {
        // Single linkage can only shrink distances to the merged slot; other
        // linkages may too, so keep the cache exact either way.
        nn[static_cast<std::size_t>(i)] = a;
        nn_d[static_cast<std::size_t>(i)] = D(i, a);
      } else if (i < a && D(i, a) == nn_d[static_cast<std::size_t>(i)] && a < cached) {
        nn[static_cast<std::size_t>(i)] = a;
      }
    }
  }
  return table;
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    x = parent[static_cast<std::size_t>(x)];
  }
  return x;
}

}  // namespace

std::vector<int> cut_tree(const MergeTable& table, int n, const AggloCut& cut) {
  if (cut.k.has_value() == cut.distance_threshold.has_value())
    throw PreconditionError("agglomerative: give exactly one of k or distance_threshold");
  if (static_cast<int>(table.rows.size()) != n - 1) throw PreconditionError("cut_tree: merge table has wrong length");
  std::size_t merges = 0;
  if (cut.k) {
    if (*cut.k < 1 || *cut.k > n)
      throw PreconditionError("agglomerative: k=" + std::to_string(*cut.k) + " must lie in [1, " + std::to_string(n) + "]");
    merges = static_cast<std::size_t>(n - *cut.k);
  } else {
    while (merges < table.rows.size() && table.rows[merges].distance < *cut.distance_threshold) ++merges;
  }
  // Node ids: points 0..n-1, merge s creates n+s. Union-find over node ids.
  std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t s = 0; s < merges; ++s) {
    const int node = n + static_cast<int>(s);
    parent[static_cast<std::size_t>(find_root(parent, table.rows[s].left))] = node;
    parent[static_cast<std::size_t>(find_root(parent, table.rows[s].right))] = node;
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<int> remap(parent.size(), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int root = find_root(parent, i);
    if (remap[static_cast<std::size_t>(root)] < 0) remap[static_cast<std::size_t>(root)] = next++;
    labels[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(root)];
  }
  return labels;
}

ClusteringResult agglomerative(const Matrix& X, Linkage linkage, const AggloCut& cut) {
  if (cut.k.has_value() == cut.distance_threshold.has_value())
    throw PreconditionError("agglomerative: give exactly one of k or distance_threshold");
  ClusteringResult result;
  result.algorithm = "agglomerative";
  MergeTable table = linkage_tree(X, linkage);
  result.labels = cut_tree(table, static_cast<int>(X.rows()), cut);
  result.k = *std::max_element(result.labels.begin(), result.labels.end()) + 1;
  result.representatives = cluster_means(X, result.labels, result.k);
  result.objective = within_cluster_ss(X, result.labels, result.representatives);
  result.extras = std::move(table);
  return result;
}

}  // namespace evdetect
