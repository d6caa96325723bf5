#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apce/basis.hpp"
#include "apce/measure.hpp"
#include "apce/sparse_solver.hpp"

namespace apce {

struct FitMeta {
  int training_count = 0;
  double sigma = 0.0;
  int iterations = 0;
  bool converged = false;
  double residual_l2 = 0.0;
};

/// Fitted expansion. Evaluation composes the input chain
/// v = ((Q^T x) - shift) / scale and returns c . Psi(v); rotation is the
/// identity and shift/scale trivial unless the pipeline set them.
struct Surrogate {
  PolynomialBasis basis;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd rotation;
  Eigen::VectorXd input_shift;
  Eigen::VectorXd input_scale;
  FitMeta fit;

  int dimension() const { return basis.dimension(); }
  void validate() const;

  Eigen::MatrixXd to_basis_inputs(const Eigen::MatrixXd& pts) const;
  double evaluate(const Eigen::VectorXd& x) const;
  Eigen::VectorXd evaluate_rows(const Eigen::MatrixXd& pts) const;

  void write(const std::string& path) const;
  static Surrogate read(const std::string& path);
};

/// G = E[grad f grad f^T] over the measure, computed exactly from the
/// triangular gradient coefficients (no finite differences).
Eigen::MatrixXd gradient_matrix(const Surrogate& s, const SampleSet& m);
Eigen::MatrixXd gradient_matrix(const Surrogate& s, const QuadratureRule& m);

/// Same with precomputed pieces: the monomial Gram is taken over the
/// surrogate's basis inputs, so repeated fits against one measure can share
/// it.
Eigen::MatrixXd gradient_matrix_cached(const Surrogate& s,
                                       const BasisGradient& grad,
                                       const Eigen::MatrixXd& mono_gram);

/// Eigendecomposition G = Q K Q^T with K descending; ties keep the original
/// order and each column's largest-magnitude entry is made positive.
Eigen::MatrixXd rotation_from_gradient(const Eigen::MatrixXd& G,
                                       Eigen::VectorXd* eigenvalues = nullptr);

enum class BasisType { exact, near, classical };

BasisType basis_type_from_string(const std::string& s);

struct FitOptions {
  BasisType basis_type = BasisType::exact;
  NearOrthMode near_mode = NearOrthMode::pairwise;
  DensityKind classical_family = DensityKind::uniform;  // discrete pipeline
  bool rescale_classical = true;  // per-dimension scaling of sample inputs
  double sigma = 0.0;
  SolverOptions solver;
  int rotation_iterations = 1;
};

struct PipelineResult {
  Surrogate rotated;
  Surrogate unrotated;
  Eigen::MatrixXd gradient;           // G that produced the final rotation
  Eigen::VectorXd gradient_spectrum;  // its eigenvalues, descending
};

/// Discrete-measure pipeline: data-driven basis on S, l1 fit on the training
/// pairs, gradient rotation, rebuild on the rotated samples, refit.
PipelineResult fit_discrete(const SampleSet& S,
                            const Eigen::MatrixXd& training_points,
                            const Eigen::VectorXd& training_values, int p,
                            const FitOptions& options);

/// Explicit-density pipeline: classical tensor basis, l1 fit, gradient
/// rotation under the density (sparse-grid quadrature), orthonormal rebuild
/// for the rotated variable, refit. rebuild=false keeps the original tensor
/// basis on the rotated inputs (the cautionary baseline).
PipelineResult fit_density(const Eigen::MatrixXd& training_points,
                           const Eigen::VectorXd& training_values,
                           const std::vector<DensityKind>& density, int p,
                           const FitOptions& options, bool rebuild = true);

}  // namespace apce
