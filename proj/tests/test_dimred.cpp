#include <cmath>
#include <cstring>

#include "doctest.h"
#include "evdetect/dimred.hpp"
#include "evdetect/rng.hpp"
#include "fixtures.hpp"

using namespace evdetect;

namespace {

Matrix collinear() {
  Matrix X(3, 2);
  X << 1, 1, 2, 2, 3, 3;
  return X;
}

Matrix random_matrix(int n, int F, std::uint64_t seed) {
  Rng rng(seed);
  Matrix M(n, F);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = rng.normal();
  return M;
}

// Sum of squared residuals of 1/(1 + a x^(2b)) against the target curve.
double curve_sse(double a, double b, double min_dist) {
  double s = 0;
  for (int i = 0; i < 300; ++i) {
    const double x = 3.0 * i / 299.0;
    const double target = x <= min_dist ? 1.0 : std::exp(-(x - min_dist));
    const double fit = 1.0 / (1.0 + a * std::pow(x, 2 * b));
    s += (fit - target) * (fit - target);
  }
  return s;
}

}  // namespace

TEST_CASE("pca: collinear points") {
  const PcaModel m = pca_fit(collinear(), 1);
  CHECK(m.components(0, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(m.components(0, 1) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(m.explained_variance_ratio()(0) == doctest::Approx(1.0));
  Matrix p(1, 2);
  p << 3, 3;
  CHECK(pca_transform(m, p)(0, 0) == doctest::Approx(std::sqrt(2.0)));
  Matrix mean_row = m.mean.transpose();
  CHECK(std::abs(pca_transform(m, mean_row)(0, 0)) < 1e-12);
}

TEST_CASE("pca: full rank and low rank reconstruction") {
  const Matrix full = random_matrix(50, 10, 1);
  const Matrix low = random_matrix(50, 2, 2) * random_matrix(2, 10, 3);
  for (const auto& [X, d] : {std::pair<Matrix, int>{full, 10}, std::pair<Matrix, int>{low, 2}}) {
    const PcaModel m = pca_fit(X, d);
    const Matrix G = m.components * m.components.transpose();
    CHECK((G - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-8);
    const Matrix back = (pca_transform(m, X) * m.components).rowwise() + m.mean.transpose();
    CHECK((back - X).cwiseAbs().maxCoeff() <= 1e-8);
    for (int i = 1; i < d; ++i) CHECK(m.explained_variance(i) <= m.explained_variance(i - 1));
  }
}

TEST_CASE("pca: argument errors") {
  CHECK_THROWS_AS(pca_fit(collinear(), 0), PreconditionError);
  CHECK_THROWS_AS(pca_fit(collinear(), 3), PreconditionError);
  const PcaModel m = pca_fit(collinear(), 1);
  CHECK_THROWS_AS(pca_transform(m, Matrix::Zero(2, 3)), PreconditionError);
}

TEST_CASE("curve fit: matches a brute-force least-squares search") {
  const CurveParams p = fit_curve_params(0.1);
  CHECK(p.a == doctest::Approx(1.577).epsilon(1e-2));
  CHECK(p.b == doctest::Approx(0.8951).epsilon(1e-2));
  // Coarse-to-fine grid search as an independent optimizer.
  double ba = 1, bb = 1, step = 0.5;
  for (int round = 0; round < 12; ++round, step /= 4) {
    double best = curve_sse(ba, bb, 0.1), ca = ba, cb = bb;
    for (int i = -8; i <= 8; ++i)
      for (int j = -8; j <= 8; ++j) {
        const double a = ba + i * step / 8, b = bb + j * step / 8;
        if (a <= 0 || b <= 0) continue;
        const double s = curve_sse(a, b, 0.1);
        if (s < best) best = s, ca = a, cb = b;
      }
    ba = ca, bb = cb;
  }
  CHECK(p.a == doctest::Approx(ba).epsilon(1e-3));
  CHECK(p.b == doctest::Approx(bb).epsilon(1e-3));
  CHECK(curve_sse(p.a, p.b, 0.1) <= curve_sse(ba, bb, 0.1) + 1e-9);
  CHECK(1.0 / (1.0 + p.a * std::pow(0.0, 2 * p.b)) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("knn: exact neighbours, ties to the lower index") {
  Matrix X(4, 1);
  X << 0, 1, -1, 5;
  const KnnGraph g = exact_knn(X, 2);
  CHECK(g.indices[0] == std::vector<int>{1, 2});
  CHECK(g.distances[0] == std::vector<double>{1.0, 1.0});
  CHECK(g.indices[3][0] == 1);
}

TEST_CASE("smooth knn: residuals small and memberships symmetric in [0, 1]") {
  const auto data = fixtures::three_blobs(90, 0.5, 3);
  const KnnGraph g = exact_knn(data.X, 10);
  const SmoothKnn s = smooth_knn(g);
  for (std::size_t i = 0; i < s.residual.size(); ++i) {
    CHECK(s.residual[i] <= 1e-4);
    CHECK(s.rho[i] == doctest::Approx(g.distances[i][0]));
  }
  const auto P = fuzzy_simplicial_set(g, s);
  const Eigen::MatrixXd D = Eigen::MatrixXd(P);
  CHECK((D - D.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(D.minCoeff() >= 0.0);
  CHECK(D.maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("umap: deterministic for a seed and separates blobs") {
  const auto data = fixtures::three_blobs(120, 0.1, 5);
  UmapParams p;
  p.n_epochs = 100;
  p.seed = 9;
  const Matrix a = umap_fit_transform(data.X, p);
  const Matrix b = umap_fit_transform(data.X, p);
  REQUIRE(a.rows() == 120);
  CHECK(a.cols() == 2);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
  p.seed = 10;
  CHECK(umap_fit_transform(data.X, p) != a);
  CHECK(fixtures::trustworthiness(data.X, a, 10) >= 0.9);
}

TEST_CASE("umap: needs more points than neighbours") {
  UmapParams p;
  p.n_neighbors = 15;
  CHECK_THROWS_AS(umap_fit_transform(Matrix::Random(15, 3), p), PreconditionError);
}
