#include <doctest.h>

#include <cmath>

#include "cp/metrics.hpp"
#include "cp/regularizers.hpp"
#include "oracles.hpp"

using namespace cp;

namespace {

SampleSet random_set(Rng& rng, int n, int d, double shift = 0.0) {
  SampleSet s(n, std::vector<double>(d));
  for (auto& p : s) {
    for (double& x : p) x = rng.normal() + shift;
  }
  return s;
}

// A snapshot store where every MMD² is dictated directly: cells/targets are
// singleton points, and MMD²({a},{b}) = (a²+1)² + (b²+1)² - 2(ab+1)² for
// 1-D points, which we can invert for simple targets.
SampleSet point(double x) { return {{x}}; }

}  // namespace

TEST_CASE("mmd2 hand case: {[1,0]} vs {[0,1]} equals 6") {
  const SampleSet X = {{1.0, 0.0}};
  const SampleSet Y = {{0.0, 1.0}};
  CHECK(mmd2(X, Y) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(mmd2(X, X) == 0.0);
}

TEST_CASE("mmd2 equals the double-loop oracle on random pairs") {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = rng.uniform_int(2, 8);
    const auto X = random_set(rng, rng.uniform_int(1, 50), d);
    const auto Y = random_set(rng, rng.uniform_int(1, 50), d, 0.5);
    const double got = mmd2(X, Y);
    const double want = oracle::mmd2_double_loop(X, Y);
    CHECK(std::fabs(got - want) <= 1e-10);
    CHECK(got >= -1e-12);  // biased estimator is nonnegative
  }
}

TEST_CASE("mmd2 validates inputs") {
  CHECK_THROWS(mmd2({}, {{1.0}}));
  CHECK_THROWS(mmd2({{1.0}}, {}));
  CHECK_THROWS(mmd2({{1.0, 2.0}, {1.0}}, {{0.0, 0.0}}));
  CHECK_THROWS(mmd2_unbiased({{1.0}}, {{1.0}, {2.0}}));
}

TEST_CASE("mmd2_unbiased tracks the biased estimate on large same-size sets") {
  Rng rng(5);
  const auto X = random_set(rng, 200, 2);
  const auto Y = random_set(rng, 200, 2, 1.0);
  CHECK(mmd2_unbiased(X, Y) == doctest::Approx(mmd2(X, Y)).epsilon(0.05));
  // On two samples of the same distribution the unbiased one is near 0.
  const auto Z = random_set(rng, 400, 2);
  const auto W = random_set(rng, 400, 2);
  CHECK(std::fabs(mmd2_unbiased(Z, W)) < 0.5);
}

TEST_CASE("a_mmd hand case: mean of {0.2, 0.4} is 0.3") {
  // 1-D singletons: choose points whose pairwise MMD² equal the desired
  // values. MMD²({a},{b}) with the quadratic kernel; solve numerically by
  // scanning b for fixed a = 0.
  auto solve_b = [](double target) {
    // MMD²({0},{b}) = 1 + (b²+1)² - 2 = (b²+1)² - 1.
    return std::sqrt(std::sqrt(target + 1.0) - 1.0);
  };
  SnapshotStore store;
  store.targets[1] = point(0.0);
  store.targets[2] = point(0.0);
  store.cells[{2, 1}] = point(solve_b(0.2));
  store.cells[{2, 2}] = point(solve_b(0.4));
  CHECK(mmd2(store.targets[1], store.cell(2, 1)) ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK(a_mmd(store, 2) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("f_mmd and bwt_mmd: hand cases and N<2 contract") {
  auto solve_b = [](double target) {
    return std::sqrt(std::sqrt(target + 1.0) - 1.0);
  };
  SnapshotStore store;
  store.targets[1] = point(0.0);
  store.targets[2] = point(0.0);
  store.cells[{1, 1}] = point(solve_b(0.4));  // MMD²(X_D1, X_11) = 0.4
  store.cells[{2, 1}] = point(solve_b(0.5));  // MMD²(X_D1, X_21) = 0.5
  store.cells[{2, 2}] = point(0.0);
  // BwT = (0.4 - 0.5)/(2-1) = -0.1.
  CHECK(bwt_mmd(store, 2) == doctest::Approx(-0.1).epsilon(1e-12));
  // F = MMD²(X_11, X_21) directly.
  CHECK(f_mmd(store, 2) ==
        doctest::Approx(mmd2(store.cell(1, 1), store.cell(2, 1)))
            .epsilon(1e-15));
  CHECK(f_mmd(store, 1) == 0.0);
  CHECK(bwt_mmd(store, 1) == 0.0);
  CHECK_THROWS(store.cell(3, 1));
  CHECK_THROWS(store.target(9));
}

TEST_CASE("metric formulas recomputed from first principles") {
  Rng rng(7);
  SnapshotStore store;
  const int N = 3;
  for (int j = 1; j <= N; ++j) {
    store.targets[j] = random_set(rng, 20, 2, j);
    for (int i = j; i <= N; ++i) {
      store.cells[{i, j}] = random_set(rng, 20, 2, 0.3 * i + j);
    }
  }
  double a = 0.0;
  for (int j = 1; j <= N; ++j) {
    a += oracle::mmd2_double_loop(store.target(j), store.cell(N, j));
  }
  CHECK(a_mmd(store, N) == doctest::Approx(a / N).epsilon(1e-12));
  double f = 0.0, bwt = 0.0;
  for (int j = 1; j < N; ++j) {
    f += oracle::mmd2_double_loop(store.cell(j, j), store.cell(N, j));
    bwt += oracle::mmd2_double_loop(store.target(j), store.cell(j, j)) -
           oracle::mmd2_double_loop(store.target(j), store.cell(N, j));
  }
  CHECK(f_mmd(store, N) == doctest::Approx(f / (N - 1)).epsilon(1e-12));
  CHECK(bwt_mmd(store, N) == doctest::Approx(bwt / (N - 1)).epsilon(1e-12));
}

TEST_CASE("topk_eigenvalues: single-gradient FIM g=[1,2] gives {5, 0}") {
  // g gᵀ = [[1,2],[2,4]], eigenvalues 5 and 0.
  const std::vector<std::vector<double>> fim = {{1.0, 2.0}, {2.0, 4.0}};
  const auto eig = topk_eigenvalues(fim, 2);
  REQUIRE(eig.size() == 2);
  CHECK(eig[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(eig[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(topk_eigenvalues(fim, 1).size() == 1);
  CHECK_THROWS(topk_eigenvalues({{1.0, 2.0}}, 1));
}

TEST_CASE("topk_eigenvalues matches the Jacobi oracle on random PSD matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = rng.uniform_int(2, 12);
    // Build PSD as a sum of outer products.
    std::vector<std::vector<double>> m(dim, std::vector<double>(dim, 0.0));
    for (int k = 0; k < dim + 2; ++k) {
      std::vector<double> g(dim);
      for (double& x : g) x = rng.normal();
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m[i][j] += g[i] * g[j];
    }
    const auto got = topk_eigenvalues(m, dim);
    const auto want = oracle::jacobi_eigenvalues(m);
    for (int i = 0; i < dim; ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-8));
    }
  }
}

TEST_CASE("fim_matrix: symmetric PSD, eigensolver path consistent") {
  Rng mrng(13);
  DenoiserModel model(DenoiserModel::Dims{}, 2, mrng);
  model.set_num_seen_concepts(2);
  const auto schedule = make_schedule(10, 1e-4, 0.02);
  SampleSet data = {{0.2, 0.4}, {-0.6, 0.1}, {0.9, -0.2}};

  Rng r1(17), r2(17);
  // head.bias has 2 entries: small enough for dense treatment.
  const auto fim = fim_matrix(model, "head.bias", data, true, 8, 3, 1.0,
                              schedule, r1);
  REQUIRE(fim.size() == 2);
  CHECK(fim[0][1] == doctest::Approx(fim[1][0]).epsilon(1e-12));
  const auto eig_oracle = oracle::jacobi_eigenvalues(fim);
  CHECK(eig_oracle.back() >= -1e-10);  // PSD
  const auto got = fim_eigen_topk(model, "head.bias", data, true, 2, 8, 3,
                                  1.0, schedule, r2);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == doctest::Approx(eig_oracle[i]).epsilon(1e-8));
  }
  CHECK_THROWS(fim_matrix(model, "no.such.layer", data, true, 1, 3, 1.0,
                          schedule, r1));
  CHECK_THROWS(fim_matrix(model, "trunk.0.weight", data, true, 1, 3, 1.0,
                          schedule, r1));  // > 256 params
}

TEST_CASE("dc_accuracy counts own-concept classifications") {
  Rng mrng(19);
  DenoiserModel model(DenoiserModel::Dims{}, 2, mrng);
  model.set_num_seen_concepts(2);
  const auto schedule = make_schedule(10, 1e-4, 0.02);
  std::map<int, SampleSet> sets;
  sets[1] = {{0.5, 0.5}, {0.4, 0.6}};
  sets[2] = {{-0.5, -0.5}};
  Rng rng(23);
  const double acc = dc_accuracy(model, sets, 4, schedule, rng);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  // 3 points -> accuracy is a multiple of 1/3.
  CHECK(std::fabs(acc * 3.0 - std::round(acc * 3.0)) < 1e-12);
  CHECK(dc_accuracy(model, {}, 4, schedule, rng) == 0.0);
}
