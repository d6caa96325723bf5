#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace apce {

/// Weighted point cloud standing in for a probability measure. Weights sum
/// to one; the default is uniform 1/N.
struct SampleSet {
  Eigen::MatrixXd points;   // one point per row
  Eigen::VectorXd weights;  // nonnegative, sums to 1

  int dimension() const { return static_cast<int>(points.cols()); }
  int size() const { return static_cast<int>(points.rows()); }

  static SampleSet from_points(Eigen::MatrixXd pts);
  void validate() const;

  /// First/second half split (weights renormalized to uniform halves).
  std::pair<SampleSet, SampleSet> halves() const;

  /// CSV with a "dim=<d>" header row; d columns per point, optional final
  /// weight column.
  static SampleSet read_csv(const std::string& path);
  void write_csv(const std::string& path) const;
};

enum class DensityKind { gaussian, uniform, arcsine, exponential };

DensityKind density_kind_from_string(const std::string& name);
std::string to_string(DensityKind kind);

/// Nodes and (possibly signed) weights integrating polynomials exactly up to
/// exactness_degree against a probability measure.
struct QuadratureRule {
  Eigen::MatrixXd nodes;    // one node per row
  Eigen::VectorXd weights;  // signed; sums to 1 within roundoff
  int exactness_degree = 0;

  int dimension() const { return static_cast<int>(nodes.cols()); }
  int size() const { return static_cast<int>(nodes.rows()); }
};

struct GaussianMixtureSpec {
  Eigen::VectorXd mode_weights;           // positive, sums to 1
  std::vector<Eigen::VectorXd> means;     // centered: sum a_i mu_i = 0
  std::vector<Eigen::MatrixXd> covariances;

  int mode_count() const { return static_cast<int>(means.size()); }
  int dimension() const {
    return means.empty() ? 0 : static_cast<int>(means[0].size());
  }
  void validate() const;

  /// Mixture used throughout the experiments: Dirichlet(1,..,1) weights,
  /// means uniform on [-1,1]^d recentred to zero, covariances
  /// (YY^T + I)/4 with Y a dense d x d matrix of U[0,1] entries per mode.
  static GaussianMixtureSpec random(int d, int n_modes, std::uint64_t seed);

  /// Mean and covariance of the mixture as a whole.
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
};

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

double inner_product(const ScalarField& f, const ScalarField& g,
                     const SampleSet& m);
double inner_product(const ScalarField& f, const ScalarField& g,
                     const QuadratureRule& m);

/// Gauss rule for the given 1D probability density; exact through degree
/// 2n-1. Recurrence coefficients are closed-form per family.
QuadratureRule gauss_rule_1d(DensityKind family, int n);

QuadratureRule tensor_rule(const std::vector<QuadratureRule>& rules_1d,
                           std::int64_t node_cap = 10'000'000);

/// Smolyak combination of 1D Gauss rules with linear node growth; exact for
/// total degree <= 2*level + 1. Coincident nodes are merged.
QuadratureRule smolyak_rule(DensityKind family, int d, int level,
                            std::int64_t node_cap = 10'000'000);

SampleSet sample_gaussian_mixture(const GaussianMixtureSpec& spec, int n,
                                  std::uint64_t seed);

struct AffineMap {
  Eigen::MatrixXd linear;   // m x d
  Eigen::VectorXd offset;   // length m

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return linear * x + offset;
  }
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& pts) const;
};

struct WhitenResult {
  SampleSet whitened;
  AffineMap transform;              // whitened = transform(raw)
  Eigen::VectorXd retained_energy;  // per kept mode, fractions of total
};

/// Center, decorrelate, and rescale to unit covariance; optionally truncate
/// to the leading eigenmodes covering energy_fraction of the variance.
WhitenResult pca_whiten(const SampleSet& raw, double energy_fraction = 1.0);

}  // namespace apce
