// HDBSCAN: mutual-reachability MST, condensed tree, excess-of-mass selection.
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evdetect/cluster.hpp"

namespace evdetect {

MutualReachability mutual_reachability_mst(const Matrix& X, int min_samples) {
  const int n = static_cast<int>(X.rows());
  if (min_samples < 1) throw PreconditionError("hdbscan: min_samples must be >= 1");
  if (n < min_samples)
    throw PreconditionError("hdbscan: n=" + std::to_string(n) + " is smaller than min_samples=" + std::to_string(min_samples));
  Eigen::MatrixXd D(n, n);
  for (int i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) D(i, j) = D(j, i) = (X.row(i) - X.row(j)).norm();
  }
  MutualReachability out;
  out.core_distances.resize(static_cast<std::size_t>(n));
  std::vector<double> row(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = D(i, j);
    // The point itself is its own first neighbor at distance 0.
    std::nth_element(row.begin(), row.begin() + (min_samples - 1), row.end());
    out.core_distances[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(min_samples - 1)];
  }
  if (n < 2) return out;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  std::vector<double> best(static_cast<std::size_t>(n), inf);
  std::vector<int> from(static_cast<std::size_t>(n), -1);
  int current = 0;
  in_tree[0] = true;
  for (int added = 1; added < n; ++added) {
    for (int j = 0; j < n; ++j) {
      if (in_tree[static_cast<std::size_t>(j)]) continue;
      const double mr = std::max({out.core_distances[static_cast<std::size_t>(current)],
                                  out.core_distances[static_cast<std::size_t>(j)], D(current, j)});
      if (mr < best[static_cast<std::size_t>(j)]) {
        best[static_cast<std::size_t>(j)] = mr;
        from[static_cast<std::size_t>(j)] = current;
      }
    }
    int next = -1;
    for (int j = 0; j < n; ++j) {
      if (!in_tree[static_cast<std::size_t>(j)] && (next < 0 || best[static_cast<std::size_t>(j)] < best[static_cast<std::size_t>(next)]))
        next = j;
    }
    out.mst.push_back({from[static_cast<std::size_t>(next)], next, best[static_cast<std::size_t>(next)]});
    in_tree[static_cast<std::size_t>(next)] = true;
    current = next;
  }
  return out;
}

namespace {

struct SingleLinkage {
  // Merge s creates node n+s from children left/right at distance.
  std::vector<int> left, right, size;
  std::vector<double> distance;
};

SingleLinkage single_linkage(int n, std::vector<MstEdge> edges) {
  std::stable_sort(edges.begin(), edges.end(), [](const MstEdge& a, const MstEdge& b) { return a.weight < b.weight; });
  std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> sizes(static_cast<std::size_t>(2 * n - 1), 1);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  SingleLinkage sl;
  for (std::size_t s = 0; s < edges.size(); ++s) {
    const int a = find(edges[s].a), b = find(edges[s].b);
    const int node = n + static_cast<int>(s);
    sl.left.push_back(std::min(a, b));
    sl.right.push_back(std::max(a, b));
    sl.distance.push_back(edges[s].weight);
    sizes[static_cast<std::size_t>(node)] = sizes[static_cast<std::size_t>(a)] + sizes[static_cast<std::size_t>(b)];
    sl.size.push_back(sizes[static_cast<std::size_t>(node)]);
    parent[static_cast<std::size_t>(a)] = node;
    parent[static_cast<std::size_t>(b)] = node;
  }
  return sl;
}

}  // namespace

ClusteringResult hdbscan(const Matrix& X, const HdbscanOptions& opts) {
  const int n = static_cast<int>(X.rows());
  const int mcs = opts.min_cluster_size;
  const int min_samples = opts.min_samples > 0 ? opts.min_samples : mcs;
  if (mcs < 2) throw PreconditionError("hdbscan: min_cluster_size must be >= 2");
  if (n < 1) throw PreconditionError("hdbscan: empty data");

  MutualReachability mr = mutual_reachability_mst(X, min_samples);

  ClusteringResult result;
  result.algorithm = "hdbscan";
  result.labels.assign(static_cast<std::size_t>(n), -1);
  CondensedTree tree;
  tree.n_points = n;
  tree.stability[n] = 0.0;

  double max_weight = 0.0, min_positive = std::numeric_limits<double>::infinity();
  for (const auto& e : mr.mst) {
    max_weight = std::max(max_weight, e.weight);
    if (e.weight > 0.0) min_positive = std::min(min_positive, e.weight);
  }

  if (max_weight == 0.0) {
    // Every point coincides (or n == 1): no hierarchy to condense.
    if (n >= mcs) {
      std::fill(result.labels.begin(), result.labels.end(), 0);
      result.k = 1;
      result.representatives = X.topRows(1);
      for (int i = 0; i < n; ++i) tree.rows.push_back({n, i, 0.0, 1});
      tree.selected = {n};
    } else {
      result.representatives.resize(0, X.cols());
      for (int i = 0; i < n; ++i) tree.rows.push_back({n, i, 0.0, 1});
    }
    result.extras = std::move(tree);
    return result;
  }

  const double lambda_cap = 2.0 / min_positive;
  auto to_lambda = [&](double d) { return d > 0.0 ? 1.0 / d : lambda_cap; };

  const SingleLinkage sl = single_linkage(n, mr.mst);
  const int root = 2 * n - 2;
  auto node_size = [&](int node) { return node < n ? 1 : sl.size[static_cast<std::size_t>(node - n)]; };

  // Condense: walk down from the root; relabel[node] = condensed cluster id.
  std::vector<int> relabel(static_cast<std::size_t>(2 * n - 1), -1);
  std::vector<double> birth;  // indexed by condensed id - n
  relabel[static_cast<std::size_t>(root)] = n;
  birth.push_back(0.0);
  int next_label = n + 1;

  auto drop_subtree = [&](int node, int parent, double lambda) {
    std::vector<int> stack{node};
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      if (cur < n) {
        tree.rows.push_back({parent, cur, lambda, 1});
      } else {
        stack.push_back(sl.right[static_cast<std::size_t>(cur - n)]);
        stack.push_back(sl.left[static_cast<std::size_t>(cur - n)]);
      }
    }
  };

  std::vector<int> queue{root};
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const int node = queue[qi];
    const int parent = relabel[static_cast<std::size_t>(node)];
    if (parent < 0 || node < n) continue;
    const int l = sl.left[static_cast<std::size_t>(node - n)];
    const int r = sl.right[static_cast<std::size_t>(node - n)];
    const double lambda = to_lambda(sl.distance[static_cast<std::size_t>(node - n)]);
    const int ls = node_size(l), rs = node_size(r);
    const bool l_big = ls >= mcs, r_big = rs >= mcs;
    if (l_big && r_big) {
      for (int child : {l, r}) {
        relabel[static_cast<std::size_t>(child)] = next_label;
        birth.push_back(lambda);
        tree.rows.push_back({parent, next_label, lambda, node_size(child)});
        ++next_label;
        queue.push_back(child);
      }
    } else {
      for (int child : {l, r}) {
        if (node_size(child) >= mcs) {
          relabel[static_cast<std::size_t>(child)] = parent;
          queue.push_back(child);
        } else {
          drop_subtree(child, parent, lambda);
        }
      }
    }
  }

  // Stability: sum over rows of (lambda - birth(parent)) * child_size.
  const int n_clusters = next_label - n;
  std::vector<double> stability(static_cast<std::size_t>(n_clusters), 0.0);
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n_clusters));
  for (const auto& row : tree.rows) {
    const auto p = static_cast<std::size_t>(row.parent - n);
    stability[p] += (row.lambda - birth[p]) * row.child_size;
    if (row.child >= n) children[p].push_back(row.child);
  }
  for (int c = 0; c < n_clusters; ++c) tree.stability[n + c] = stability[static_cast<std::size_t>(c)];

  // Excess of mass, leaves upward. Children always carry larger ids.
  std::vector<bool> selected(static_cast<std::size_t>(n_clusters), false);
  std::vector<double> subtree(stability);
  for (int c = n_clusters - 1; c >= 1; --c) {
    const auto uc = static_cast<std::size_t>(c);
    double child_sum = 0.0;
    for (int ch : children[uc]) child_sum += subtree[static_cast<std::size_t>(ch - n)];
    if (children[uc].empty() || stability[uc] >= child_sum) {
      selected[uc] = true;
      subtree[uc] = stability[uc];
    } else {
      subtree[uc] = child_sum;
    }
  }
  // Keep only the topmost selected cluster on each root path.
  for (int c = 1; c < n_clusters; ++c) {
    if (!selected[static_cast<std::size_t>(c)]) continue;
    std::vector<int> stack(children[static_cast<std::size_t>(c)]);
    while (!stack.empty()) {
      const int d = stack.back() - n;
      stack.pop_back();
      selected[static_cast<std::size_t>(d)] = false;
      for (int ch : children[static_cast<std::size_t>(d)]) stack.push_back(ch);
    }
  }
  for (int c = 1; c < n_clusters; ++c)
    if (selected[static_cast<std::size_t>(c)]) tree.selected.push_back(n + c);

  // Points inherit the selected ancestor of the cluster they fell out of.
  std::vector<int> owner(static_cast<std::size_t>(n_clusters), -1);
  for (std::size_t r = 0; r < tree.selected.size(); ++r) owner[static_cast<std::size_t>(tree.selected[r] - n)] = static_cast<int>(r);
  std::vector<int> cluster_parent(static_cast<std::size_t>(n_clusters), -1);
  for (const auto& row : tree.rows)
    if (row.child >= n) cluster_parent[static_cast<std::size_t>(row.child - n)] = row.parent - n;
  for (int c = 1; c < n_clusters; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    if (owner[uc] < 0 && cluster_parent[uc] >= 0) owner[uc] = owner[static_cast<std::size_t>(cluster_parent[uc])];
  }
  for (const auto& row : tree.rows)
    if (row.child < n) result.labels[static_cast<std::size_t>(row.child)] = owner[static_cast<std::size_t>(row.parent - n)];

  result.k = static_cast<int>(tree.selected.size());
  result.representatives.resize(result.k, X.cols());
  std::vector<std::vector<int>> members(static_cast<std::size_t>(result.k));
  for (int i = 0; i < n; ++i)
    if (result.labels[static_cast<std::size_t>(i)] >= 0) members[static_cast<std::size_t>(result.labels[static_cast<std::size_t>(i)])].push_back(i);
  for (int c = 0; c < result.k; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    int medoid = m.front();
    double best = std::numeric_limits<double>::infinity();
    for (int a : m) {
      double total = 0.0;
      for (int b : m) total += (X.row(a) - X.row(b)).norm();
      if (total < best) {
        best = total;
        medoid = a;
      }
    }
    result.representatives.row(c) = X.row(medoid);
  }
  result.extras = std::move(tree);
  return result;
}

}  // namespace evdetect
