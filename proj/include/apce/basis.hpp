#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apce/measure.hpp"
#include "apce/multi_index.hpp"

namespace apce {

enum class BasisProvenance {
  exact_discrete,
  exact_quadrature,
  near_orthonormal,
  classical
};

std::string to_string(BasisProvenance p);
BasisProvenance basis_provenance_from_string(const std::string& s);

/// Polynomial basis stored as a triangular stack of monomial coefficients:
/// row k holds the coefficients of psi_k over the graded-lex monomials, with
/// zero entries beyond column k and a positive diagonal, so
/// Psi(x) = coeffs * monomials(x).
struct PolynomialBasis {
  MultiIndexSet indices;
  Eigen::MatrixXd coeffs;
  BasisProvenance provenance = BasisProvenance::exact_discrete;
  std::vector<DensityKind> classical_families;  // per dimension, classical only
  int fallback_rows = 0;  // near-orthonormal rows that reverted to exact

  int dimension() const { return indices.dimension(); }
  int max_degree() const { return indices.max_degree(); }
  int size() const { return indices.size(); }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& point) const;
  /// One row Psi(x_i)^T per input row.
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& pts) const;

  void write(const std::string& path) const;
  void write_stream(std::ostream& out) const;
  static PolynomialBasis read(const std::string& path);
  static PolynomialBasis read_stream(std::istream& in,
                                     const std::string& what);
};

/// Monomial vector at a point, graded-lex order.
Eigen::VectorXd evaluate_monomials(const MultiIndexSet& idx,
                                   const Eigen::VectorXd& point);

/// One row of monomial values per input row.
Eigen::MatrixXd monomial_rows(const MultiIndexSet& idx,
                              const Eigen::MatrixXd& pts);

/// Weighted Gram matrix of the monomials, sum_k w_k m(x_k) m(x_k)^T,
/// accumulated in blocks so large sample sets never materialize the full
/// Vandermonde matrix.
Eigen::MatrixXd monomial_gram(const MultiIndexSet& idx,
                              const Eigen::MatrixXd& pts,
                              const Eigen::VectorXd& weights);

/// Empirical Gram of an arbitrary coefficient stack B (rows = polynomials):
/// sum_k w_k (B m(x_k)) (B m(x_k))^T.
Eigen::MatrixXd empirical_gram(const MultiIndexSet& idx,
                               const Eigen::MatrixXd& coeffs,
                               const Eigen::MatrixXd& pts,
                               const Eigen::VectorXd& weights);

/// Orthonormal basis for the empirical measure of S (degree <= p), built by
/// Cholesky whitening of the monomial Gram with one re-orthogonalization
/// pass.
PolynomialBasis gram_schmidt_discrete(const SampleSet& S, int d, int p);

/// Orthonormal basis for the pushforward of the rule's measure under an
/// invertible map (basis variable = map * z). Pass the identity for the
/// plain measure. Requires rule exactness >= 2p.
PolynomialBasis gram_schmidt_quadrature(const QuadratureRule& rule,
                                        const Eigen::MatrixXd& map, int d,
                                        int p);

/// Tensor-product basis of the classical families, from closed-form 1D
/// recurrences; works at any dimension.
PolynomialBasis classical_basis(const std::vector<DensityKind>& per_dim,
                                int p);
PolynomialBasis classical_basis(DensityKind family, int d, int p);

/// Cross-validated orthogonality relaxations: half-set bases applied to the
/// opposite halves, zeta = (|z1| + |z2|) / (2 sqrt(2)); diagonal entries use
/// the deviation of the squared norm from 1.
Eigen::MatrixXd cross_validation_zeta(const SampleSet& S1, const SampleSet& S2,
                                      int d, int p);

enum class NearOrthMode { pairwise, grouped };

/// Near-orthonormal basis: per row, minimize the monomial-coefficient norm
/// subject to the relaxed orthogonality bands, then renormalize. Coefficient
/// norms never exceed the exact-orthonormal ones.
PolynomialBasis near_orthonormal(const SampleSet& S, int d, int p,
                                 NearOrthMode mode = NearOrthMode::pairwise);

/// Partial derivatives in the monomial representation:
/// d/dx_j Psi(x) = per_dim[j] * monomials(x).
struct BasisGradient {
  std::vector<Eigen::MatrixXd> per_dim;
};

BasisGradient basis_gradient(const PolynomialBasis& basis);

// Shared by near_orthonormal and its tests.
struct MinNormResult {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
};

/// minimize ||x||_2 subject to anchor^T x = 1 and |A.col(i)^T x| <= z_i,
/// starting from a feasible point. Active-set method; bounds below z_floor
/// are treated as equalities.
MinNormResult min_norm_banded(const Eigen::VectorXd& anchor,
                              const Eigen::MatrixXd& A,
                              const Eigen::VectorXd& z,
                              const Eigen::VectorXd& start,
                              int max_iterations = 0);

/// Grouped variant: ||A(:, g)^T x||_2 <= budget_g per column group.
MinNormResult min_norm_grouped(const Eigen::VectorXd& anchor,
                               const Eigen::MatrixXd& A,
                               const std::vector<std::vector<int>>& groups,
                               const Eigen::VectorXd& budgets,
                               const Eigen::VectorXd& start,
                               int max_iterations = 0);

}  // namespace apce
