#pragma once

#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "apce/basis.hpp"
#include "apce/measure.hpp"

namespace apce {

struct RecoverySetup {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double sigma = 0.0;                  // noise bound, >= 0
  std::string normalization = "none";  // record of any scaling applied

  void validate() const;
};

struct RecoveryResult {
  Eigen::VectorXd c;
  double residual_l2 = 0.0;
  double l1_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double duality_gap = 0.0;
  Eigen::VectorXd dual;  // scaled dual certificate, ||A^T dual||_inf <= 1

  nlohmann::json to_json() const;
};

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 100000;
  int check_interval = 50;
};

/// A[i][j] = psi_j(training point i), columns in graded-lex order.
Eigen::MatrixXd assemble_measurement_matrix(const PolynomialBasis& basis,
                                            const Eigen::MatrixXd& training);

/// min ||c||_1 s.t. A c = b (setup.sigma must be 0).
RecoveryResult basis_pursuit(const RecoverySetup& setup,
                             const SolverOptions& options = {});

/// min ||c||_1 s.t. ||A c - b||_2 <= sigma.
RecoveryResult bpdn(const RecoverySetup& setup,
                    const SolverOptions& options = {});

/// Weighted relative l2 error sqrt(sum w (f - g)^2 / sum w f^2).
double relative_l2_error(const Eigen::VectorXd& truth,
                         const Eigen::VectorXd& surrogate,
                         const Eigen::VectorXd& weights);

/// Power-method estimate of the spectral norm.
double operator_norm_estimate(const Eigen::MatrixXd& A, int iterations = 60);

}  // namespace apce
