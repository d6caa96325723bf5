#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "apce/measure.hpp"
#include "apce/multi_index.hpp"
#include "apce/rng.hpp"

using namespace apce;

namespace {

double monomial_moment_1d(DensityKind family, int power) {
  // Closed-form moments of the four densities.
  switch (family) {
    case DensityKind::gaussian: {
      if (power % 2) return 0.0;
      double v = 1.0;
      for (int k = power - 1; k > 1; k -= 2) v *= k;
      return v;  // (power-1)!!
    }
    case DensityKind::uniform:
      return (power % 2) ? 0.0 : 1.0 / (power + 1);
    case DensityKind::arcsine: {
      if (power % 2) return 0.0;
      const int m = power / 2;
      double binom = 1.0;
      for (int j = 1; j <= m; ++j) binom *= static_cast<double>(m + j) / j;
      return binom / std::pow(4.0, m);  // C(2m, m) / 4^m
    }
    case DensityKind::exponential: {
      double v = 1.0;
      for (int k = 2; k <= power; ++k) v *= k;
      return v;  // power!
    }
  }
  return 0.0;
}

double rule_moment(const QuadratureRule& rule, const MultiIndex& alpha) {
  double acc = 0.0;
  for (int k = 0; k < rule.size(); ++k) {
    double term = rule.weights[k];
    for (int j = 0; j < rule.dimension(); ++j)
      for (int e = 0; e < alpha[j]; ++e) term *= rule.nodes(k, j);
    acc += term;
  }
  return acc;
}

}  // namespace

TEST_CASE("inner product basics") {
  Eigen::MatrixXd pts(2, 1);
  pts << -0.7, 0.7;
  SampleSet s = SampleSet::from_points(pts);
  auto one = [](const Eigen::VectorXd&) { return 1.0; };
  auto id = [](const Eigen::VectorXd& x) { return x[0]; };
  CHECK(inner_product(one, one, s) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(inner_product(id, one, s) == doctest::Approx(0.0).epsilon(1e-14));

  auto bad = [](const Eigen::VectorXd&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS(inner_product(bad, one, s));
}

TEST_CASE("normalized Hermite squared integrates to one under Monte Carlo") {
  Rng rng(2024);
  Eigen::MatrixXd pts(1000000, 1);
  for (int i = 0; i < pts.rows(); ++i) pts(i, 0) = rng.normal();
  SampleSet s = SampleSet::from_points(pts);
  auto h2 = [](const Eigen::VectorXd& x) {
    return (x[0] * x[0] - 1.0) / std::sqrt(2.0);
  };
  const double mc = inner_product(h2, h2, s);
  CHECK(mc == doctest::Approx(1.0).epsilon(0.01));

  // Quadrature reference gives exactly 1.
  const QuadratureRule rule = gauss_rule_1d(DensityKind::gaussian, 4);
  std::vector<QuadratureRule> rules = {rule};
  const QuadratureRule tensor = tensor_rule(rules);
  CHECK(inner_product(h2, h2, tensor) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gauss rules reproduce closed-form cases") {
  SUBCASE("uniform two nodes") {
    const QuadratureRule r = gauss_rule_1d(DensityKind::uniform, 2);
    CHECK(std::abs(r.nodes(0, 0)) ==
          doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.weights[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rule_moment(r, {2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("arcsine three nodes are Chebyshev points") {
    const QuadratureRule r = gauss_rule_1d(DensityKind::arcsine, 3);
    std::vector<double> nodes = {r.nodes(0, 0), r.nodes(1, 0), r.nodes(2, 0)};
    std::sort(nodes.begin(), nodes.end());
    CHECK(nodes[0] == doctest::Approx(std::cos(5.0 * M_PI / 6.0)).epsilon(1e-12));
    CHECK(nodes[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(nodes[2] == doctest::Approx(std::cos(M_PI / 6.0)).epsilon(1e-12));
    for (int k = 0; k < 3; ++k)
      CHECK(r.weights[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rule_moment(r, {2}) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("gaussian single node sits at the mean") {
    const QuadratureRule r = gauss_rule_1d(DensityKind::gaussian, 1);
    CHECK(r.nodes(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("randomized monomial audit of 1d rules") {
  Rng rng(7);
  for (DensityKind family :
       {DensityKind::gaussian, DensityKind::uniform, DensityKind::arcsine,
        DensityKind::exponential}) {
    for (int n : {1, 2, 3, 5, 8}) {
      const QuadratureRule r = gauss_rule_1d(family, n);
      for (int rep = 0; rep < 4; ++rep) {
        const int power = rng.uniform_int(r.exactness_degree + 1);
        const double expected = monomial_moment_1d(family, power);
        const double got = rule_moment(r, {power});
        // Relative to the rule's absolute mass: odd moments of symmetric
        // measures are exact zeros reached by cancellation.
        double mass = 0.0;
        for (int k = 0; k < r.size(); ++k)
          mass += std::abs(r.weights[k]) *
                  std::pow(std::abs(r.nodes(k, 0)), power);
        CHECK(std::abs(got - expected) <= 1e-10 * (1.0 + mass));
      }
    }
  }
}

TEST_CASE("tensor rule") {
  const QuadratureRule u2 = gauss_rule_1d(DensityKind::uniform, 2);
  std::vector<QuadratureRule> rules = {u2, u2};
  const QuadratureRule t = tensor_rule(rules);
  REQUIRE(t.size() == 4);
  for (int k = 0; k < 4; ++k)
    CHECK(t.weights[k] == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(rule_moment(t, {2, 2}) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));

  std::vector<QuadratureRule> one = {u2};
  const QuadratureRule same = tensor_rule(one);
  CHECK(same.nodes == u2.nodes);
  CHECK(same.weights == u2.weights);

  std::vector<QuadratureRule> big(10, gauss_rule_1d(DensityKind::uniform, 8));
  CHECK_THROWS_WITH_AS(tensor_rule(big, 1000), doctest::Contains("cap"),
                       std::runtime_error);
}

TEST_CASE("smolyak rules") {
  SUBCASE("level 0 collapses to the single Gauss-1 point") {
    const QuadratureRule r = smolyak_rule(DensityKind::exponential, 3, 0);
    REQUIRE(r.size() == 1);
    CHECK(r.nodes(0, 0) == doctest::Approx(1.0).epsilon(1e-12));  // mean
    CHECK(r.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("d=2 gaussian level 2 integrates x1^2 x2^2") {
    const QuadratureRule r = smolyak_rule(DensityKind::gaussian, 2, 2);
    CHECK(rule_moment(r, {2, 2}) == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("d=16 arcsine level 4 integrates a degree-6 monomial") {
    const QuadratureRule r = smolyak_rule(DensityKind::arcsine, 16, 4);
    // random total-degree-6 exponent over 16 dims
    MultiIndex alpha(16, 0);
    alpha[3] = 2;
    alpha[7] = 2;
    alpha[11] = 2;
    double expected = 1.0;
    for (int j = 0; j < 16; ++j)
      expected *= monomial_moment_1d(DensityKind::arcsine, alpha[j]);
    CHECK(rule_moment(r, alpha) == doctest::Approx(expected).epsilon(1e-8));

    MultiIndex odd(16, 0);
    odd[0] = 3;
    odd[5] = 2;
    odd[9] = 1;
    CHECK(rule_moment(r, odd) == doctest::Approx(0.0).epsilon(1e-8));
  }
  SUBCASE("weights sum to one") {
    for (int level : {0, 1, 2, 3}) {
      const QuadratureRule r = smolyak_rule(DensityKind::uniform, 4, level);
      CHECK(r.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("gaussian mixture sampling") {
  SUBCASE("single standard mode obeys the law of large numbers") {
    GaussianMixtureSpec spec;
    const int d = 4;
    spec.mode_weights = Eigen::VectorXd::Ones(1);
    spec.means = {Eigen::VectorXd::Zero(d)};
    spec.covariances = {Eigen::MatrixXd::Identity(d, d)};
    const int n = 100000;
    const SampleSet s = sample_gaussian_mixture(spec, n, 11);
    const Eigen::VectorXd mean = s.points.colwise().mean();
    const double tol = 3.0 * std::sqrt(static_cast<double>(d) / n);
    for (int j = 0; j < d; ++j) CHECK(std::abs(mean[j]) < tol);
  }
  SUBCASE("paper-style spec passes its invariants") {
    const GaussianMixtureSpec spec = GaussianMixtureSpec::random(25, 3, 5);
    spec.validate();  // centered means, SPD covariances
    CHECK(spec.mode_count() == 3);
    CHECK(spec.dimension() == 25);
  }
  SUBCASE("fixed seed reproduces the draw") {
    const GaussianMixtureSpec spec = GaussianMixtureSpec::random(3, 2, 9);
    const SampleSet a = sample_gaussian_mixture(spec, 1, 1234);
    const SampleSet b = sample_gaussian_mixture(spec, 1, 1234);
    CHECK(a.points == b.points);
  }
  SUBCASE("sample covariance converges to the mixture covariance") {
    const GaussianMixtureSpec spec = GaussianMixtureSpec::random(5, 3, 21);
    const Eigen::MatrixXd target = spec.covariance();
    double prev = 1e100;
    for (int n : {1000, 10000, 100000}) {
      const SampleSet s = sample_gaussian_mixture(spec, n, 77);
      const Eigen::VectorXd mean = s.points.colwise().mean();
      Eigen::MatrixXd centered = s.points.rowwise() - mean.transpose();
      const Eigen::MatrixXd cov =
          centered.transpose() * centered / static_cast<double>(n);
      const double dist = (cov - target).norm();
      CHECK(dist < prev);
      prev = dist;
    }
  }
}

TEST_CASE("pca whitening") {
  Rng rng(5);
  SUBCASE("diag(4,1) data whitens to unit variances") {
    Eigen::MatrixXd pts(20000, 2);
    for (int i = 0; i < pts.rows(); ++i) {
      pts(i, 0) = 2.0 * rng.normal();
      pts(i, 1) = rng.normal();
    }
    const WhitenResult w = pca_whiten(SampleSet::from_points(pts));
    const Eigen::VectorXd mean = w.whitened.points.colwise().mean();
    CHECK(mean.lpNorm<Eigen::Infinity>() < 1e-10);
    const Eigen::MatrixXd cov = w.whitened.points.transpose() *
                                w.whitened.points /
                                static_cast<double>(pts.rows());
    CHECK((cov - Eigen::MatrixXd::Identity(2, 2)).lpNorm<Eigen::Infinity>() <
          1e-10);
    // Leading-mode energy fraction near 4/(4+1).
    CHECK(w.retained_energy[0] == doctest::Approx(0.8).epsilon(0.05));
  }
  SUBCASE("whitening an already-white set keeps covariance identity") {
    Eigen::MatrixXd pts(5000, 3);
    for (int i = 0; i < pts.rows(); ++i)
      for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal();
    const WhitenResult w1 = pca_whiten(SampleSet::from_points(pts));
    const WhitenResult w2 = pca_whiten(w1.whitened);
    const Eigen::MatrixXd cov = w2.whitened.points.transpose() *
                                w2.whitened.points /
                                static_cast<double>(pts.rows());
    CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).lpNorm<Eigen::Infinity>() <
          1e-10);
  }
  SUBCASE("rank deficiency is reported") {
    Eigen::MatrixXd pts(400, 2);
    for (int i = 0; i < pts.rows(); ++i) {
      pts(i, 0) = rng.normal();
      pts(i, 1) = 3.0 * pts(i, 0);  // collinear
    }
    CHECK_THROWS(pca_whiten(SampleSet::from_points(pts)));
  }
}

TEST_CASE("csv round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "apce_measure_test";
  fs::create_directories(dir);
  const std::string path = (dir / "points.csv").string();

  Rng rng(3);
  Eigen::MatrixXd pts(37, 3);
  for (int i = 0; i < pts.rows(); ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal();
  SampleSet s = SampleSet::from_points(pts);
  s.write_csv(path);
  const SampleSet back = SampleSet::read_csv(path);
  CHECK(back.dimension() == 3);
  CHECK((back.points - s.points).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((back.weights - s.weights).lpNorm<Eigen::Infinity>() < 1e-15);

  // Weighted variant keeps the weight column.
  s.weights[0] = 0.5;
  s.weights.tail(36).setConstant(0.5 / 36);
  s.write_csv(path);
  const SampleSet wback = SampleSet::read_csv(path);
  CHECK(wback.weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  fs::remove_all(dir);
}
