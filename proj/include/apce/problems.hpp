#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apce/measure.hpp"
#include "apce/multi_index.hpp"

namespace apce {

/// Linear combination of monomials on a fixed support.
struct MonomialTarget {
  int dimension = 0;
  std::vector<MultiIndex> support;
  Eigen::VectorXd coefficients;

  double evaluate(const Eigen::VectorXd& x) const;
  Eigen::VectorXd evaluate_rows(const Eigen::MatrixXd& pts) const;
};

enum class CoeffMode { ones, lognormal, decay };

CoeffMode coeff_mode_from_string(const std::string& s);

/// Random monomial target: support drawn uniformly without replacement from
/// the total-degree index set; "decay" uses every index with coefficients
/// eta_i / i^1.5, eta_i ~ U[0,1].
MonomialTarget sparse_monomial_target(int d, int p, int s, CoeffMode mode,
                                      std::uint64_t seed);

/// Truncated Karhunen-Loeve expansion of the exponential covariance
/// exp(-|x - x'|/l_c) on [0,1]: even/odd frequency branches from the
/// classical transcendental equations, closed-form normalized
/// eigenfunctions.
struct KLExpansion {
  double correlation_length = 0.0;
  double amplitude = 1.0;  // sigma in front of the sum
  double mean_value = 0.0; // constant mean a0
  Eigen::VectorXd eigenvalues;  // descending

  struct Mode {
    bool even = true;
    double omega = 0.0;
    double normalization = 0.0;
  };
  std::vector<Mode> modes;

  int count() const { return static_cast<int>(modes.size()); }
  double eigenfunction(int i, double x) const;
  /// a(x) = a0 + sigma * sum sqrt(lambda_i) phi_i(x) xi_i
  double log_field(double x, const Eigen::VectorXd& xi) const;
};

KLExpansion kl_exponential(double l_c, double sigma, int d);

/// Midpoint-rule Nystrom eigenvalues of the same kernel, for validation.
Eigen::VectorXd nystrom_eigenvalues(double l_c, int n_points, int count);

/// Two-point boundary solution functional for -(D u')' = 1 on (0,1) with
/// u(0) = u(1) = 0 and D = exp(a): closed-form quadratures on composite
/// Gauss panels totaling quad_n points.
double elliptic_solve(const KLExpansion& kl, const Eigen::VectorXd& xi,
                      double x_star, int quad_n = 512);

/// Gaussian-mixture inputs whitened to zero mean and unit covariance.
SampleSet dependent_input_sampler(const GaussianMixtureSpec& spec, int n,
                                  std::uint64_t seed,
                                  AffineMap* transform = nullptr);

/// Named target functions addressable from configs.
struct TargetFunction {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> fn;
};

using TargetParams = std::map<std::string, std::string>;

TargetFunction make_target(const std::string& name, const TargetParams& params,
                           int d, int p, std::uint64_t seed);
std::vector<std::pair<std::string, std::string>> registered_targets();

}  // namespace apce
