#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "apce/basis.hpp"
#include "apce/measure.hpp"

namespace apce {

struct SupportSpec {
  std::vector<int> indices;  // sorted, distinct, within [0, N)

  int sparsity() const { return static_cast<int>(indices.size()); }
  void validate(int column_count) const;
};

struct RicReport {
  double delta_s = 0.0;
  double theta_s = 0.0;
  double indicator = 0.0;  // theta_s / (1 - delta_s), +inf when delta_s >= 1
  bool exact = false;      // full candidate enumeration ran
  std::int64_t tprime_count = 0;

  nlohmann::json to_json() const;
};

/// Spectral norm of the empirical Gram deviation
/// || (1/M) sum Psi(x_k) Psi(x_k)^T - I ||_2.
double gram_deviation(const PolynomialBasis& basis, const Eigen::MatrixXd& pts);

/// Support-restricted isometry constants of A on T. delta_s comes from the
/// extreme eigenvalues of A_T^T A_T; theta_s maximizes ||A_t'^T A_T||_2 over
/// complement subsets with |t'| = s, exhaustively when C(N-s, s) fits the
/// budget and by greedy selection with random restarts otherwise.
RicReport ric_constants(const Eigen::MatrixXd& A, const SupportSpec& T,
                        std::int64_t budget = 1'000'000,
                        std::uint64_t seed = 0);

/// Conditional tail mean of k(x) = max_i |psi_i(x)| over points farther than
/// m_sigma standard deviations from the mean of k; falls back to the maximum
/// when no point qualifies.
double basis_bound(const PolynomialBasis& basis, const SampleSet& S,
                   double m_sigma);

struct NullSpaceProbe {
  Eigen::MatrixXd vectors;          // one qualifying kernel vector per column
  Eigen::MatrixXd sorted_profiles;  // |v| sorted descending, per column
  int requested = 0;
  bool shortfall = false;
};

/// Unit kernel vectors of A with more l1 mass on T than on its complement,
/// found by isotropic sampling over an orthonormal kernel basis with
/// rejection. Stops early when the per-vector attempt cap is exhausted.
NullSpaceProbe null_space_probe(const Eigen::MatrixXd& A, const SupportSpec& T,
                                int count, std::uint64_t seed,
                                int per_vector_cap = 20000);

}  // namespace apce
