#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "apce/rng.hpp"
#include "apce/sparse_solver.hpp"

using namespace apce;

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = rng.normal();
  return a;
}

// Exhaustive smallest-support least-squares search; reports whether the
// minimizer is unique at its sparsity level.
struct L0Result {
  Eigen::VectorXd c;
  int sparsity = -1;
  bool unique = false;
};

L0Result brute_force_l0(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                        int max_s, double residual_tol) {
  const int n = static_cast<int>(A.cols());
  L0Result result;
  for (int s = 0; s <= max_s && result.sparsity < 0; ++s) {
    std::vector<int> pick(s);
    for (int i = 0; i < s; ++i) pick[i] = i;
    int hits = 0;
    Eigen::VectorXd best;
    while (true) {
      Eigen::MatrixXd sub(A.rows(), s);
      for (int i = 0; i < s; ++i) sub.col(i) = A.col(pick[i]);
      Eigen::VectorXd coef =
          s == 0 ? Eigen::VectorXd() : sub.colPivHouseholderQr().solve(b).eval();
      const double res =
          s == 0 ? b.norm() : (sub * coef - b).norm();
      if (res <= residual_tol) {
        ++hits;
        best = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < s; ++i) best[pick[i]] = coef[i];
      }
      if (s == 0) break;
      int j = s - 1;
      while (j >= 0 && pick[j] == n - s + j) --j;
      if (j < 0) break;
      ++pick[j];
      for (int l = j + 1; l < s; ++l) pick[l] = pick[l - 1] + 1;
    }
    if (hits > 0) {
      result.sparsity = s;
      result.unique = hits == 1;
      result.c = best;
    }
  }
  return result;
}

}  // namespace

TEST_CASE("relative l2 error formula") {
  Eigen::VectorXd f(3), w(3);
  f << 1, -2, 3;
  w << 0.25, 0.5, 0.25;
  CHECK(relative_l2_error(f, f, w) == 0.0);
  CHECK(relative_l2_error(f, Eigen::VectorXd::Zero(3), w) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(relative_l2_error(f, 2 * f, w) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS(relative_l2_error(Eigen::VectorXd::Zero(3), f, w));
}

TEST_CASE("identity system returns the observations") {
  RecoverySetup setup;
  setup.A = Eigen::MatrixXd::Identity(6, 6);
  setup.b = (Eigen::VectorXd(6) << 3, 0, -1, 0.5, 0, 2).finished();
  const RecoveryResult res = basis_pursuit(setup);
  REQUIRE(res.converged);
  CHECK((res.c - setup.b).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("degenerate tie keeps feasibility and the optimal objective") {
  RecoverySetup setup;
  setup.A = Eigen::MatrixXd(1, 2);
  setup.A << 1, 1;
  setup.b = Eigen::VectorXd::Constant(1, 2.0);
  const RecoveryResult res = basis_pursuit(setup);
  REQUIRE(res.converged);
  CHECK(std::abs(res.c.sum() - 2.0) < 1e-7);
  CHECK(res.l1_norm == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("bpdn with slack larger than the data returns zero") {
  Rng rng(1);
  RecoverySetup setup;
  setup.A = gaussian_matrix(5, 12, rng);
  setup.b = Eigen::VectorXd::Ones(5);
  setup.sigma = 10.0;
  const RecoveryResult res = bpdn(setup);
  REQUIRE(res.converged);
  CHECK(res.c.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("bpdn approaches basis pursuit as sigma vanishes") {
  Rng rng(7);
  const int m = 12, n = 24;
  Eigen::MatrixXd A = gaussian_matrix(m, n, rng);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(n);
  truth[3] = 1.5;
  truth[17] = -0.5;
  RecoverySetup setup;
  setup.A = A;
  setup.b = A * truth;
  const RecoveryResult bp = basis_pursuit(setup);
  setup.sigma = 1e-10;
  const RecoveryResult dn = bpdn(setup);
  REQUIRE(bp.converged);
  REQUIRE(dn.converged);
  CHECK((bp.c - dn.c).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("dual certificate accompanies converged runs") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 10, n = 30;
    Eigen::MatrixXd A = gaussian_matrix(m, n, rng);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(n);
    truth[rng.uniform_int(n)] = rng.normal();
    truth[rng.uniform_int(n)] = rng.normal();
    RecoverySetup setup;
    setup.A = A;
    setup.b = A * truth;
    const RecoveryResult res = basis_pursuit(setup);
    REQUIRE(res.converged);
    CHECK((A.transpose() * res.dual).lpNorm<Eigen::Infinity>() <= 1.0 + 1e-6);
    CHECK(res.dual.dot(setup.b) >= res.l1_norm - 1e-6 * (1 + res.l1_norm));
  }
}

TEST_CASE("l1 norm is non-increasing along a sigma ladder") {
  Rng rng(13);
  const int m = 15, n = 40;
  Eigen::MatrixXd A = gaussian_matrix(m, n, rng);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < 4; ++k) truth[rng.uniform_int(n)] = rng.normal();
  RecoverySetup setup;
  setup.A = A;
  setup.b = A * truth;
  double prev = 1e100;
  for (double sigma : {1e-8, 1e-3, 1e-2, 1e-1, 1.0}) {
    setup.sigma = sigma;
    const RecoveryResult res = bpdn(setup);
    REQUIRE(res.converged);
    CHECK(res.l1_norm <= prev + 1e-9);
    CHECK(res.residual_l2 <= sigma + 1e-7 * (1 + setup.b.norm()));
    prev = res.l1_norm;
  }
}

TEST_CASE("matches exhaustive l0 search on small instances") {
  Rng rng(2718);
  int compared = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 20 + rng.uniform_int(21);  // up to 40
    const int s = 1 + rng.uniform_int(3);
    // comfortably above the 2 s log N floor so l1 recovery holds reliably
    const int m =
        std::max(static_cast<int>(2.5 * s * std::log(n)) + 5, 4 * s);
    Eigen::MatrixXd A = gaussian_matrix(m, n, rng);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < s; ++k) {
      int idx = rng.uniform_int(n);
      while (truth[idx] != 0.0) idx = rng.uniform_int(n);
      truth[idx] = rng.normal() + (rng.uniform01() < 0.5 ? 2.0 : -2.0);
    }
    RecoverySetup setup;
    setup.A = A;
    setup.b = A * truth;
    const L0Result l0 = brute_force_l0(A, setup.b, 3, 1e-8 * setup.b.norm());
    REQUIRE(l0.sparsity >= 0);
    if (!l0.unique) continue;
    ++compared;
    const RecoveryResult l1 = basis_pursuit(setup);
    REQUIRE(l1.converged);
    CHECK((l1.c - l0.c).lpNorm<Eigen::Infinity>() < 1e-5);
  }
  CHECK(compared >= 20);
}

TEST_CASE("infeasible observations are reported") {
  RecoverySetup setup;
  setup.A = Eigen::MatrixXd(2, 1);
  setup.A << 1, 1;
  setup.b = (Eigen::VectorXd(2) << 1, 2).finished();
  CHECK_THROWS_WITH_AS(basis_pursuit(setup), doctest::Contains("infeasible"),
                       std::runtime_error);
}

TEST_CASE("validation rejects bad setups") {
  RecoverySetup setup;
  setup.A = Eigen::MatrixXd::Identity(3, 3);
  setup.b = Eigen::VectorXd::Ones(2);
  CHECK_THROWS(basis_pursuit(setup));
  setup.b = Eigen::VectorXd::Ones(3);
  setup.sigma = -1;
  CHECK_THROWS(bpdn(setup));
  setup.sigma = 0.5;
  CHECK_THROWS(basis_pursuit(setup));  // sigma must be zero here
}

TEST_CASE("result serializes to the documented json shape") {
  RecoverySetup setup;
  setup.A = Eigen::MatrixXd::Identity(2, 2);
  setup.b = (Eigen::VectorXd(2) << 1, -2).finished();
  const RecoveryResult res = basis_pursuit(setup);
  const nlohmann::json j = res.to_json();
  CHECK(j.contains("c"));
  CHECK(j.contains("residual_l2"));
  CHECK(j.contains("l1_norm"));
  CHECK(j.contains("iterations"));
  CHECK(j.contains("converged"));
  CHECK(j["c"].size() == 2);
}
