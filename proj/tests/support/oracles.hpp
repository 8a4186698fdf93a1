#pragma once
// Reference implementations written directly from the definitions, on plain
// nested vectors, with no code shared with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t f = 0; f < a.size(); ++f) s += (a[f] - b[f]) * (a[f] - b[f]);
  return s;
}

struct CsaiPart {
  Rows training;
  std::vector<int> labels;  // 0..N-1, no noise
  Rows representatives;     // N rows
};

/// Mean over partitions of the mean over clusters of
/// sqrt(mean_f (V_f - T_f)^2) / (T_max - T_min). Clusters receiving no
/// validation row are left out of their partition's mean.
inline double csai(const std::vector<CsaiPart>& parts, const Rows& validation) {
  double total = 0;
  for (const auto& p : parts) {
    const std::size_t N = p.representatives.size(), F = validation[0].size();
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (const auto& r : p.training)
      for (double x : r) tmin = std::min(tmin, x), tmax = std::max(tmax, x);

    Rows T(N, std::vector<double>(F, 0.0)), V(N, std::vector<double>(F, 0.0));
    std::vector<int> nt(N, 0), nv(N, 0);
    for (std::size_t i = 0; i < p.training.size(); ++i) {
      const auto c = static_cast<std::size_t>(p.labels[i]);
      ++nt[c];
      for (std::size_t f = 0; f < F; ++f) T[c][f] += p.training[i][f];
    }
    for (const auto& v : validation) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < N; ++c)
        if (sqdist(v, p.representatives[c]) < sqdist(v, p.representatives[best])) best = c;
      ++nv[best];
      for (std::size_t f = 0; f < F; ++f) V[best][f] += v[f];
    }
    double sum = 0;
    int used = 0;
    for (std::size_t c = 0; c < N; ++c) {
      if (nv[c] == 0) continue;
      double se = 0;
      for (std::size_t f = 0; f < F; ++f) {
        const double diff = V[c][f] / nv[c] - T[c][f] / nt[c];
        se += diff * diff;
      }
      sum += std::sqrt(se / F) / (tmax - tmin);
      ++used;
    }
    total += sum / used;
  }
  return total / parts.size();
}

// ---------------------------------------------------------------------------

enum class Link { single, complete, average, ward };

struct Merge {
  int left, right;
  double distance;
  int size;
};

/// Cluster distance recomputed from the member points at every step. Ward is
/// reported as the increase in within-cluster sum of squares.
inline double cluster_distance(const Rows& X, const std::vector<int>& A, const std::vector<int>& B, Link link) {
  if (link == Link::ward) {
    auto ess = [&](const std::vector<int>& m) {
      std::vector<double> mu(X[0].size(), 0.0);
      for (int i : m)
        for (std::size_t f = 0; f < mu.size(); ++f) mu[f] += X[static_cast<std::size_t>(i)][f] / m.size();
      double s = 0;
      for (int i : m) s += sqdist(X[static_cast<std::size_t>(i)], mu);
      return s;
    };
    std::vector<int> u = A;
    u.insert(u.end(), B.begin(), B.end());
    return ess(u) - ess(A) - ess(B);
  }
  double best = link == Link::single ? std::numeric_limits<double>::infinity() : 0.0;
  double sum = 0;
  for (int a : A)
    for (int b : B) {
      const double d = std::sqrt(sqdist(X[static_cast<std::size_t>(a)], X[static_cast<std::size_t>(b)]));
      if (link == Link::single) best = std::min(best, d);
      if (link == Link::complete) best = std::max(best, d);
      sum += d;
    }
  if (link == Link::average) return sum / (A.size() * B.size());
  return best;
}

/// Naive agglomeration: all pairwise cluster distances from scratch each step.
/// Ids: points 0..n-1, the cluster made at step s is n+s; left is the smaller id.
inline std::vector<Merge> agglomerate(const Rows& X, Link link) {
  const int n = static_cast<int>(X.size());
  std::vector<int> ids;
  std::vector<std::vector<int>> members;
  for (int i = 0; i < n; ++i) ids.push_back(i), members.push_back({i});
  std::vector<Merge> out;
  for (int step = 0; step < n - 1; ++step) {
    std::size_t ba = 0, bb = 1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        const double d = cluster_distance(X, members[a], members[b], link);
        if (d < bd) bd = d, ba = a, bb = b;
      }
    Merge m{std::min(ids[ba], ids[bb]), std::max(ids[ba], ids[bb]), bd,
            static_cast<int>(members[ba].size() + members[bb].size())};
    out.push_back(m);
    members[ba].insert(members[ba].end(), members[bb].begin(), members[bb].end());
    ids[ba] = n + step;
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(bb));
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Minimum total distance from each point to its nearest medoid over every
/// k-subset (small n only).
inline double best_medoid_cost(const Rows& X, int k, std::vector<int>* best_set = nullptr) {
  const int n = static_cast<int>(X.size());
  std::vector<int> pick(static_cast<std::size_t>(k));
  std::iota(pick.begin(), pick.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    double cost = 0;
    for (int i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (int m : pick) d = std::min(d, std::sqrt(sqdist(X[static_cast<std::size_t>(i)], X[static_cast<std::size_t>(m)])));
      cost += d;
    }
    if (cost < best) {
      best = cost;
      if (best_set) *best_set = pick;
    }
    int i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

/// Minimum WSS over every assignment of n points to k non-empty clusters.
inline double best_wss(const Rows& X, int k) {
  const int n = static_cast<int>(X.size());
  std::vector<int> lab(static_cast<std::size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<std::vector<double>> mu(static_cast<std::size_t>(k), std::vector<double>(X[0].size(), 0.0));
    std::vector<int> cnt(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      ++cnt[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])];
      for (std::size_t f = 0; f < X[0].size(); ++f) mu[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])][f] += X[static_cast<std::size_t>(i)][f];
    }
    if (std::all_of(cnt.begin(), cnt.end(), [](int c) { return c > 0; })) {
      double w = 0;
      for (int c = 0; c < k; ++c)
        for (auto& v : mu[static_cast<std::size_t>(c)]) v /= cnt[static_cast<std::size_t>(c)];
      for (int i = 0; i < n; ++i) w += sqdist(X[static_cast<std::size_t>(i)], mu[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])]);
      best = std::min(best, w);
    }
    int i = 0;
    while (i < n && ++lab[static_cast<std::size_t>(i)] == k) lab[static_cast<std::size_t>(i++)] = 0;
    if (i == n) break;
  }
  return best;
}

// ---------------------------------------------------------------------------

/// Distance to the m-th nearest point, the point itself counted as the first.
inline std::vector<double> core_distances(const Rows& X, int m) {
  std::vector<double> out;
  for (const auto& a : X) {
    std::vector<double> d;
    for (const auto& b : X) d.push_back(std::sqrt(sqdist(a, b)));
    std::sort(d.begin(), d.end());
    out.push_back(d[static_cast<std::size_t>(m - 1)]);
  }
  return out;
}

/// Kruskal on the complete mutual-reachability graph; returns total weight.
inline double mst_weight(const Rows& X, const std::vector<double>& core) {
  const int n = static_cast<int>(X.size());
  struct E { double w; int a, b; };
  std::vector<E> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      edges.push_back({std::max({core[static_cast<std::size_t>(a)], core[static_cast<std::size_t>(b)],
                                 std::sqrt(sqdist(X[static_cast<std::size_t>(a)], X[static_cast<std::size_t>(b)]))}), a, b});
  std::sort(edges.begin(), edges.end(), [](const E& x, const E& y) { return x.w < y.w; });
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  double total = 0;
  for (const auto& e : edges) {
    const int ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    parent[static_cast<std::size_t>(ra)] = rb;
    total += e.w;
  }
  return total;
}

}  // namespace oracle
