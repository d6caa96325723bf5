#include "apce/sparse_solver.hpp"

#include <cmath>
#include <stdexcept>

namespace apce {

void RecoverySetup::validate() const {
  if (A.rows() < 1 || A.cols() < 1)
    throw std::invalid_argument("empty measurement matrix");
  if (b.size() != A.rows())
    throw std::invalid_argument("observation length mismatch");
  if (!A.allFinite() || !b.allFinite())
    throw std::invalid_argument("non-finite recovery inputs");
  if (sigma < 0) throw std::invalid_argument("negative noise bound");
}

nlohmann::json RecoveryResult::to_json() const {
  nlohmann::json j;
  j["c"] = std::vector<double>(c.data(), c.data() + c.size());
  j["residual_l2"] = residual_l2;
  j["l1_norm"] = l1_norm;
  j["iterations"] = iterations;
  j["converged"] = converged;
  return j;
}

Eigen::MatrixXd assemble_measurement_matrix(const PolynomialBasis& basis,
                                            const Eigen::MatrixXd& training) {
  if (training.cols() != basis.dimension())
    throw std::invalid_argument("training dimension mismatch");
  return basis.evaluate_rows(training);
}

double relative_l2_error(const Eigen::VectorXd& truth,
                         const Eigen::VectorXd& surrogate,
                         const Eigen::VectorXd& weights) {
  if (truth.size() != surrogate.size() || truth.size() != weights.size())
    throw std::invalid_argument("length mismatch");
  const double denom = (weights.array() * truth.array().square()).sum();
  if (denom <= 0.0)
    throw std::invalid_argument("reference function has zero l2 norm");
  const double num =
      (weights.array() * (truth - surrogate).array().square()).sum();
  return std::sqrt(num / denom);
}

double operator_norm_estimate(const Eigen::MatrixXd& A, int iterations) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols());
  v.normalize();
  double norm = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = A.transpose() * (A * v);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    norm = std::sqrt(wn);
  }
  return norm;
}

namespace {

// Unique-feasible-point shortcut: with at least as many rows as columns and
// full column rank, A c = b pins c regardless of the objective, and a dual
// certificate solves A^T y = sign(c) exactly.
bool solve_determined(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                      double tolerance, RecoveryResult& res) {
  if (A.rows() < A.cols()) return false;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < A.cols()) return false;
  const Eigen::VectorXd x = qr.solve(b);
  const double feas = (A * x - b).norm();
  if (feas > tolerance * (1.0 + b.norm())) return false;  // inconsistent rows

  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i)
    g[i] = (x[i] > 0.0) - (x[i] < 0.0);
  // Min-norm solution of the underdetermined A^T y = g.
  const Eigen::VectorXd y =
      A * (A.transpose() * A).ldlt().solve(g);

  res.c = x;
  res.iterations = 0;
  res.converged = true;
  res.residual_l2 = feas;
  res.l1_norm = x.lpNorm<1>();
  res.duality_gap = res.l1_norm - b.dot(y);
  res.dual = y;
  return true;
}

// Primal-dual iteration for min ||c||_1 subject to ||Ac - b|| <= sigma
// (equality when sigma = 0). The dual prox is a shift by the data followed
// by an l2 shrink; the primal prox is soft thresholding.
RecoveryResult solve_l1(const RecoverySetup& setup,
                        const SolverOptions& options) {
  setup.validate();
  const Eigen::MatrixXd& A = setup.A;
  const Eigen::VectorXd& b = setup.b;
  const double sigma = setup.sigma;
  const int n = static_cast<int>(A.cols());

  RecoveryResult res;
  if (sigma == 0.0 && solve_determined(A, b, options.tolerance, res))
    return res;

  const double opnorm = operator_norm_estimate(A);
  if (opnorm == 0.0) throw std::invalid_argument("zero measurement matrix");
  const double step = 0.95 / opnorm;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd xbar = x;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(A.rows());
  Eigen::VectorXd ysum = Eigen::VectorXd::Zero(A.rows());

  const double bnorm = b.norm();

  auto soft = [&](Eigen::VectorXd& v, double t) {
    v = v.array().sign() * (v.array().abs() - t).max(0.0);
  };
  // Any y gives a lower bound through its scaled-feasible version; report
  // the certificate and gap for the better of the last and averaged duals.
  auto dual_bound = [&](const Eigen::VectorXd& cand, Eigen::VectorXd& yhat) {
    const double linf = (A.transpose() * cand).lpNorm<Eigen::Infinity>();
    yhat = -cand / std::max(1.0, linf);
    return b.dot(yhat) - sigma * yhat.norm();
  };

  for (int it = 1; it <= options.max_iterations; ++it) {
    y = y + step * (A * xbar) - step * b;
    if (sigma > 0.0) {
      const double wn = y.norm();
      y *= (wn > 0.0) ? std::max(0.0, 1.0 - step * sigma / wn) : 0.0;
    }
    ysum += y;

    Eigen::VectorXd xprev = x;
    x -= step * (A.transpose() * y);
    soft(x, step);
    xbar = 2.0 * x - xprev;

    if (it % options.check_interval == 0 || it == options.max_iterations) {
      const Eigen::VectorXd residual = A * x - b;
      const double feas = residual.norm();
      Eigen::VectorXd yhat = Eigen::VectorXd::Zero(A.rows());
      double dual_obj = 0.0;
      // Candidate certificates: last iterate, ergodic average, and the
      // residual direction (parallel to the optimal dual at the solution).
      Eigen::VectorXd cand_hat;
      for (int which = 0; which < 3; ++which) {
        Eigen::VectorXd cand;
        if (which == 0) cand = y;
        else if (which == 1) cand = ysum / it;
        else if (feas > 0) cand = residual;
        else continue;
        const double bound = dual_bound(cand, cand_hat);
        if (which == 0 || bound > dual_obj) {
          dual_obj = bound;
          yhat = cand_hat;
        }
      }
      const double l1 = x.lpNorm<1>();
      const double gap = l1 - dual_obj;

      const double feas_tol =
          sigma + options.tolerance * (1.0 + bnorm);
      if (feas <= feas_tol && gap <= options.tolerance * (1.0 + l1)) {
        res.c = x;
        res.iterations = it;
        res.converged = true;
        res.residual_l2 = feas;
        res.l1_norm = l1;
        res.duality_gap = gap;
        res.dual = yhat;
        return res;
      }

      // Infeasibility certificate: the iterates settle on a residual that is
      // orthogonal to the range of A yet far from the feasible tube, i.e. b
      // has a component outside range(A).
      if (feas > 10.0 * feas_tol) {
        const double ortho = (A.transpose() * residual).norm();
        if (ortho <= 1e-9 * opnorm * feas)
          throw std::runtime_error(
              "recovery problem is infeasible: observations outside the "
              "range of the measurement matrix");
      }
    }
  }

  res.c = x;
  res.iterations = options.max_iterations;
  res.converged = false;
  res.residual_l2 = (A * x - b).norm();
  res.l1_norm = x.lpNorm<1>();
  Eigen::VectorXd yhat;
  res.duality_gap = res.l1_norm - dual_bound(y, yhat);
  res.dual = yhat;
  return res;
}

}  // namespace

RecoveryResult basis_pursuit(const RecoverySetup& setup,
                             const SolverOptions& options) {
  if (setup.sigma != 0.0)
    throw std::invalid_argument("basis_pursuit requires sigma = 0");
  return solve_l1(setup, options);
}

RecoveryResult bpdn(const RecoverySetup& setup, const SolverOptions& options) {
  return solve_l1(setup, options);
}

}  // namespace apce
