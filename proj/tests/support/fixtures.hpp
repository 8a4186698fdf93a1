#pragma once
// Synthetic data generators and scoring helpers shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "evdetect/common.hpp"
#include "evdetect/rng.hpp"

namespace fixtures {

using evdetect::Matrix;

struct Labeled {
  Matrix X;
  std::vector<int> truth;
};

/// Isotropic Gaussian blobs, points dealt round-robin over the centers.
inline Labeled blobs(const Matrix& centers, int n, double sigma, std::uint64_t seed) {
  evdetect::Rng rng(seed);
  Labeled out{Matrix(n, centers.cols()), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int c = i % static_cast<int>(centers.rows());
    out.truth[static_cast<std::size_t>(i)] = c;
    for (Eigen::Index f = 0; f < centers.cols(); ++f) out.X(i, f) = centers(c, f) + sigma * rng.normal();
  }
  return out;
}

/// Equilateral triangle with side `side` in the plane.
inline Matrix triangle_centers(double side = 10.0) {
  Matrix c(3, 2);
  c << 0.0, 0.0, side, 0.0, side / 2.0, side * std::sqrt(3.0) / 2.0;
  return c;
}

inline Labeled three_blobs(int n, double sigma, std::uint64_t seed, double side = 10.0) {
  return blobs(triangle_centers(side), n, sigma, seed);
}

/// k centers drawn uniformly in [-box, box]^F, redrawn until every pair is at
/// least min_gap apart.
inline Matrix separated_centers(int k, int F, double box, double min_gap, std::uint64_t seed) {
  evdetect::Rng rng(seed ^ 0x5eedULL);
  Matrix c(k, F);
  for (int i = 0; i < k; ++i) {
    for (;;) {
      for (int f = 0; f < F; ++f) c(i, f) = rng.uniform(-box, box);
      bool ok = true;
      for (int j = 0; j < i && ok; ++j) ok = (c.row(i) - c.row(j)).norm() >= min_gap;
      if (ok) break;
    }
  }
  return c;
}

/// Vertices of a regular simplex (k points in k dimensions, every pair
/// `edge` apart), each coordinate jittered by N(0, jitter^2); redrawn until
/// every pair is at least min_gap apart. Gives blobs with no nested grouping.
inline Matrix simplex_centers(int k, double edge, double jitter, double min_gap, std::uint64_t seed) {
  evdetect::Rng rng(seed ^ 0x51e7ULL);
  Matrix c(k, k);
  for (;;) {
    c = Matrix::Identity(k, k) * (edge / std::sqrt(2.0));
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] += jitter * rng.normal();
    bool ok = true;
    for (int i = 0; i < k && ok; ++i)
      for (int j = 0; j < i && ok; ++j) ok = (c.row(i) - c.row(j)).norm() >= min_gap;
    if (ok) return c;
  }
}

/// Two interleaving half circles with Gaussian jitter.
inline Labeled two_moons(int n, double noise, std::uint64_t seed) {
  evdetect::Rng rng(seed);
  const int n_out = n / 2, n_in = n - n_out;
  Labeled out{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
  const double pi = std::acos(-1.0);
  for (int i = 0; i < n_out; ++i) {
    const double t = pi * i / (n_out - 1);
    out.X(i, 0) = std::cos(t);
    out.X(i, 1) = std::sin(t);
    out.truth[static_cast<std::size_t>(i)] = 0;
  }
  for (int i = 0; i < n_in; ++i) {
    const double t = pi * i / (n_in - 1);
    out.X(n_out + i, 0) = 1.0 - std::cos(t);
    out.X(n_out + i, 1) = 0.5 - std::sin(t);
    out.truth[static_cast<std::size_t>(n_out + i)] = 1;
  }
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < 2; ++f) out.X(i, f) += noise * rng.normal();
  return out;
}

/// Adjusted Rand index from the contingency table.
inline double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double sj = 0, sa = 0, sb = 0;
  for (auto& [k, v] : joint) sj += c2(v);
  for (auto& [k, v] : ra) sa += c2(v);
  for (auto& [k, v] : rb) sb += c2(v);
  const double total = c2(static_cast<double>(a.size()));
  const double expected = sa * sb / total;
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (sj - expected) / (max_index - expected);
}

/// Trustworthiness of embedding Y for data X with k neighbors: penalizes
/// points that are neighbors in Y but not in X, by their rank in X.
inline double trustworthiness(const Matrix& X, const Matrix& Y, int k) {
  const int n = static_cast<int>(X.rows());
  auto ranked = [n](const Matrix& M, int i) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < n; ++j)
      if (j != i) d.push_back({(M.row(i) - M.row(j)).squaredNorm(), j});
    std::sort(d.begin(), d.end());
    std::vector<int> order;
    for (auto& p : d) order.push_back(p.second);
    return order;
  };
  double penalty = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto ox = ranked(X, i), oy = ranked(Y, i);
    std::vector<int> rank_x(static_cast<std::size_t>(n), 0);
    for (int r = 0; r < n - 1; ++r) rank_x[static_cast<std::size_t>(ox[static_cast<std::size_t>(r)])] = r + 1;
    for (int r = 0; r < k; ++r) {
      const int j = oy[static_cast<std::size_t>(r)];
      const int rx = rank_x[static_cast<std::size_t>(j)];
      if (rx > k) penalty += rx - k;
    }
  }
  return 1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty;
}

inline int count_distinct_non_noise(const std::vector<int>& labels) {
  std::vector<int> v;
  for (int l : labels)
    if (l >= 0) v.push_back(l);
  std::sort(v.begin(), v.end());
  return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace fixtures

#include <fstream>
#include <sstream>
#include <string>

namespace fixtures {

inline std::vector<std::vector<double>> rows_of(const evdetect::Matrix& M) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index f = 0; f < M.cols(); ++f) out[static_cast<std::size_t>(i)].push_back(M(i, f));
  return out;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Minimal XML check for the emitted SVGs: a single <svg> root, every element
/// closed in order, attribute quotes balanced.
inline bool svg_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  bool saw_root = false;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    const std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty()) {
      if (saw_root || name != "svg") return false;
      saw_root = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return saw_root && stack.empty();
}

}  // namespace fixtures
