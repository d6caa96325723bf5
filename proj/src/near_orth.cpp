#include <cmath>
#include <stdexcept>
#include <vector>

#include "apce/basis.hpp"

namespace apce {

namespace {

constexpr double kZetaFloor = 1e-13;

// Working-set solver state for min ||x||_2 s.t. B x = c on the active rows.
// Keeps an upper-triangular Cholesky factor of B B^T, extended by one row at
// a time; drops trigger a refactorization (rare).
class ActiveSet {
 public:
  explicit ActiveSet(int n) : n_(n) {}

  int count() const { return static_cast<int>(rows_.size()); }
  const Eigen::VectorXd& row(int i) const { return rows_[i]; }
  int id(int i) const { return ids_[i]; }

  bool add(const Eigen::VectorXd& b, double rhs, int id) {
    const int m = count();
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = rows_[i].dot(b);
    Eigen::VectorXd w(m);
    if (m > 0) {
      const Eigen::MatrixXd upper = chol_.topLeftCorner(m, m);
      const auto view = upper.triangularView<Eigen::Upper>();
      w = view.transpose().solve(v);
    }
    const double pivot2 = b.squaredNorm() - (m > 0 ? w.squaredNorm() : 0.0);
    if (pivot2 <= 1e-24 * std::max(1.0, b.squaredNorm())) return false;
    if (chol_.rows() < m + 1) {
      Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(2 * m + 4, 2 * m + 4);
      grown.topLeftCorner(chol_.rows(), chol_.cols()) = chol_;
      chol_.swap(grown);
    }
    chol_.col(m).head(m) = w;
    chol_(m, m) = std::sqrt(pivot2);
    rows_.push_back(b);
    rhs_.push_back(rhs);
    ids_.push_back(id);
    return true;
  }

  void drop(int i) {
    rows_.erase(rows_.begin() + i);
    rhs_.erase(rhs_.begin() + i);
    ids_.erase(ids_.begin() + i);
    refactor();
  }

  // Least-norm point of {x : B x = c} and the multipliers alpha with
  // x = B^T alpha.
  void solve(Eigen::VectorXd& x, Eigen::VectorXd& alpha) const {
    const int m = count();
    Eigen::VectorXd c(m);
    for (int i = 0; i < m; ++i) c[i] = rhs_[i];
    const Eigen::MatrixXd upper = chol_.topLeftCorner(m, m);
    const auto view = upper.triangularView<Eigen::Upper>();
    alpha = view.solve(view.transpose().solve(c));
    x.setZero(n_);
    for (int i = 0; i < m; ++i) x += alpha[i] * rows_[i];
  }

 private:
  void refactor() {
    const int m = count();
    Eigen::MatrixXd gram(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= i; ++j)
        gram(j, i) = gram(i, j) = rows_[i].dot(rows_[j]);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("active set became degenerate");
    chol_ = Eigen::MatrixXd::Zero(m, m);
    chol_.triangularView<Eigen::Upper>() =
        Eigen::MatrixXd(llt.matrixU());
  }

  int n_;
  std::vector<Eigen::VectorXd> rows_;
  std::vector<double> rhs_;
  std::vector<int> ids_;
  Eigen::MatrixXd chol_;
};

}  // namespace

MinNormResult min_norm_banded(const Eigen::VectorXd& anchor,
                              const Eigen::MatrixXd& A,
                              const Eigen::VectorXd& z,
                              const Eigen::VectorXd& start,
                              int max_iterations) {
  const int n = static_cast<int>(anchor.size());
  const int m = static_cast<int>(A.cols());
  if (max_iterations <= 0) max_iterations = 6 * (m + 2) + 40;

  MinNormResult res;
  res.x = start;

  ActiveSet active(n);
  // id convention: -1 anchor equality, i in [0, m) the band on column i;
  // signs live in the stored row direction.
  if (!active.add(anchor, 1.0, -1))
    throw std::runtime_error("degenerate normalization constraint");
  std::vector<bool> in_set(m, false);
  for (int i = 0; i < m; ++i) {
    if (z[i] <= kZetaFloor) {
      // Hard equality; keep it in the working set permanently.
      if (active.add(A.col(i), 0.0, i)) in_set[i] = true;
    }
  }

  Eigen::VectorXd target, alpha;
  for (int iter = 0; iter < max_iterations; ++iter) {
    res.iterations = iter + 1;
    active.solve(target, alpha);
    const Eigen::VectorXd step = target - res.x;
    if (step.norm() <= 1e-13 * (1.0 + res.x.norm())) {
      // Multiplier signs: x = sum alpha_i b_i; a bound row entered as
      // s * a_i needs alpha <= 0, otherwise dropping it lowers the norm.
      int worst = -1;
      double worst_val = 1e-10;
      for (int i = 0; i < active.count(); ++i) {
        const int cid = active.id(i);
        if (cid < 0) continue;
        if (z[cid] <= kZetaFloor) continue;  // equality rows stay
        if (alpha[i] > worst_val) {
          worst_val = alpha[i];
          worst = i;
        }
      }
      if (worst < 0) {
        res.converged = true;
        return res;
      }
      in_set[active.id(worst)] = false;
      active.drop(worst);
      continue;
    }

    // Step toward the working-set optimum, stopping at the first band that
    // would be crossed.
    double t = 1.0;
    int blocker = -1;
    double blocker_sign = 1.0;
    for (int i = 0; i < m; ++i) {
      if (in_set[i] || z[i] <= kZetaFloor) continue;
      const double g = A.col(i).dot(step);
      const double v = A.col(i).dot(res.x);
      if (g > 1e-15) {
        const double ti = (z[i] - v) / g;
        if (ti < t) {
          t = std::max(ti, 0.0);
          blocker = i;
          blocker_sign = 1.0;
        }
      } else if (g < -1e-15) {
        const double ti = (-z[i] - v) / g;
        if (ti < t) {
          t = std::max(ti, 0.0);
          blocker = i;
          blocker_sign = -1.0;
        }
      }
    }
    res.x += t * step;
    if (blocker < 0) continue;  // reached the subproblem optimum
    if (active.add(blocker_sign * A.col(blocker), z[blocker], blocker)) {
      in_set[blocker] = true;
    } else {
      // Linearly dependent blocker; cannot make progress safely.
      return res;
    }
  }
  return res;
}

MinNormResult min_norm_grouped(const Eigen::VectorXd& anchor,
                               const Eigen::MatrixXd& A,
                               const std::vector<std::vector<int>>& groups,
                               const Eigen::VectorXd& budgets,
                               const Eigen::VectorXd& start,
                               int max_iterations) {
  const int n = static_cast<int>(anchor.size());
  const int g = static_cast<int>(groups.size());
  if (max_iterations <= 0) max_iterations = 400;

  // Tight groups are enforced as hard equalities alongside the anchor.
  std::vector<int> hard_cols;
  std::vector<int> soft;
  for (int r = 0; r < g; ++r) {
    if (budgets[r] <= kZetaFloor)
      hard_cols.insert(hard_cols.end(), groups[r].begin(), groups[r].end());
    else
      soft.push_back(r);
  }
  Eigen::MatrixXd C(n, 1 + hard_cols.size());
  C.col(0) = anchor;
  for (std::size_t i = 0; i < hard_cols.size(); ++i)
    C.col(1 + static_cast<int>(i)) = A.col(hard_cols[i]);
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(C.cols());
  c0[0] = 1.0;

  std::vector<Eigen::MatrixXd> gram_soft(soft.size());
  for (std::size_t i = 0; i < soft.size(); ++i) {
    const auto& cols = groups[soft[i]];
    Eigen::MatrixXd Ar(n, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
      Ar.col(static_cast<int>(j)) = A.col(cols[j]);
    gram_soft[i] = Ar * Ar.transpose();
  }

  // Dual ascent over the group multipliers theta >= 0: for fixed theta the
  // primal solve is an equality-constrained quadratic in H(theta).
  auto primal = [&](const Eigen::VectorXd& th) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t i = 0; i < soft.size(); ++i) H += th[i] * gram_soft[i];
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    const Eigen::MatrixXd HiC = llt.solve(C);
    const Eigen::MatrixXd S = C.transpose() * HiC;
    return Eigen::VectorXd(HiC * S.ldlt().solve(c0));
  };
  auto dual_value = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& x) {
    double v = 0.5 * x.squaredNorm();
    for (std::size_t i = 0; i < soft.size(); ++i)
      v += 0.5 * th[i] *
           (x.dot(gram_soft[i] * x) - budgets[soft[i]] * budgets[soft[i]]);
    return v;
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(soft.size());
  MinNormResult res;
  res.x = primal(theta);
  double value = dual_value(theta, res.x);
  double rate = 1.0;
  for (int iter = 0; iter < max_iterations; ++iter) {
    res.iterations = iter + 1;
    Eigen::VectorXd grad(soft.size());
    double kkt = 0.0;
    for (std::size_t i = 0; i < soft.size(); ++i) {
      const double load = res.x.dot(gram_soft[i] * res.x);
      const double cap = budgets[soft[i]] * budgets[soft[i]];
      grad[i] = 0.5 * (load - cap);
      kkt = std::max(kkt, load - cap);                    // feasibility
      kkt = std::max(kkt, theta[i] * std::abs(load - cap));  // slackness
    }
    if (kkt <= 1e-12) {
      res.converged = true;
      return res;
    }
    // Backtracking ascent step.
    bool improved = false;
    for (int bt = 0; bt < 40 && !improved; ++bt) {
      const Eigen::VectorXd next = (theta + rate * grad).cwiseMax(0.0);
      const Eigen::VectorXd xn = primal(next);
      const double vn = dual_value(next, xn);
      if (vn > value + 1e-18) {
        theta = next;
        res.x = xn;
        value = vn;
        rate *= 1.6;
        improved = true;
      } else {
        rate *= 0.5;
      }
    }
    if (!improved) break;
  }
  // Feasibility decides convergence when the iteration cap runs out.
  double worst = 0.0;
  for (std::size_t i = 0; i < soft.size(); ++i) {
    const double load = res.x.dot(gram_soft[i] * res.x);
    worst = std::max(worst, load - budgets[soft[i]] * budgets[soft[i]]);
  }
  res.converged = worst <= 1e-10;
  return res;
}

namespace {

// Renormalize a candidate row to unit empirical norm; if the rescaled row
// breaks a band, bisect back toward the exact row (always feasible).
bool finalize_row(const Eigen::MatrixXd& gram_sub, const Eigen::MatrixXd& A,
                  const Eigen::VectorXd& z, const Eigen::VectorXd& exact_row,
                  Eigen::VectorXd& candidate) {
  auto feasible = [&](const Eigen::VectorXd& x) {
    for (int i = 0; i < A.cols(); ++i) {
      const double v = std::abs(A.col(i).dot(x));
      if (v > z[i] + 1e-10) return false;
    }
    return true;
  };
  auto renormalize = [&](Eigen::VectorXd x) -> Eigen::VectorXd {
    const double s = std::sqrt(x.dot(gram_sub * x));
    if (!(s > 1e-12)) return exact_row;
    return x / s;
  };

  Eigen::VectorXd scaled = renormalize(candidate);
  if (feasible(scaled)) {
    candidate = scaled;
    return true;
  }
  double lo = 0.0, hi = 1.0;  // t = 1 is the exact row
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Eigen::VectorXd mix =
        renormalize((1.0 - mid) * candidate + mid * exact_row);
    if (feasible(mix))
      hi = mid;
    else
      lo = mid;
  }
  const Eigen::VectorXd mix =
      renormalize((1.0 - hi) * candidate + hi * exact_row);
  if (!feasible(mix)) return false;
  candidate = mix;
  return true;
}

}  // namespace

PolynomialBasis near_orthonormal(const SampleSet& S, int d, int p,
                                 NearOrthMode mode) {
  S.validate();
  if (S.dimension() != d)
    throw std::invalid_argument("sample dimension mismatch");

  const auto [s1, s2] = S.halves();
  const Eigen::MatrixXd zeta = cross_validation_zeta(s1, s2, d, p);
  const PolynomialBasis exact = gram_schmidt_discrete(S, d, p);
  const MultiIndexSet& idx = exact.indices;
  const int n = idx.size();
  const Eigen::MatrixXd gram = monomial_gram(idx, S.points, S.weights);

  PolynomialBasis basis{MultiIndexSet(d, p), Eigen::MatrixXd::Zero(n, n),
                        BasisProvenance::near_orthonormal};

  // Columns of fixed_products hold gram * (finished row), so the band values
  // against row k are plain dot products.
  Eigen::MatrixXd fixed_products = Eigen::MatrixXd::Zero(n, n);
  basis.coeffs(0, 0) = exact.coeffs(0, 0);
  fixed_products.col(0) = gram * basis.coeffs.row(0).transpose();

  for (int k = 1; k < n; ++k) {
    const Eigen::VectorXd exact_row =
        exact.coeffs.row(k).head(k + 1).transpose();
    const Eigen::MatrixXd gram_sub = gram.topLeftCorner(k + 1, k + 1);
    const Eigen::VectorXd anchor = gram_sub * exact_row;
    const Eigen::MatrixXd bands = fixed_products.topLeftCorner(k + 1, k);
    const Eigen::VectorXd bounds = zeta.row(k).head(k).transpose();

    MinNormResult sol;
    if (mode == NearOrthMode::pairwise) {
      sol = min_norm_banded(anchor, bands, bounds, exact_row);
    } else {
      const int deg = degree_of(idx.at(k));
      std::vector<std::vector<int>> groups(deg + 1);
      for (int i = 0; i < k; ++i)
        groups[degree_of(idx.at(i))].push_back(i);
      Eigen::VectorXd budgets(deg + 1);
      for (int r = 0; r <= deg; ++r) {
        double acc = 0.0;
        for (int i : groups[r]) acc += bounds[i] * bounds[i];
        budgets[r] = std::sqrt(acc);
      }
      sol = min_norm_grouped(anchor, bands, groups, budgets, exact_row);
    }

    Eigen::VectorXd row = sol.converged ? sol.x : exact_row;
    bool ok = sol.converged;
    if (ok && mode == NearOrthMode::pairwise)
      ok = finalize_row(gram_sub, bands, bounds, exact_row, row);
    else if (ok) {
      // Grouped mode renormalizes the same way; group budgets were already
      // respected by the dual solve and scaling only shrinks them.
      const double s = std::sqrt(row.dot(gram_sub * row));
      ok = s > 1e-12;
      if (ok) row /= s;
    }
    if (!ok || row.squaredNorm() > exact_row.squaredNorm() + 1e-12) {
      row = exact_row;
      ++basis.fallback_rows;
    }
    basis.coeffs.row(k).head(k + 1) = row.transpose();
    if (basis.coeffs(k, k) < 0) basis.coeffs.row(k) *= -1.0;
    // Full column: later subproblems read deeper band values.
    fixed_products.col(k).noalias() =
        gram.leftCols(k + 1) * basis.coeffs.row(k).head(k + 1).transpose();
  }
  return basis;
}

}  // namespace apce
