#include "apce/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "apce/rng.hpp"

namespace apce {

void SupportSpec::validate(int column_count) const {
  if (indices.empty()) throw std::invalid_argument("empty support");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= column_count)
      throw std::invalid_argument("support index out of range");
    if (i > 0 && indices[i] <= indices[i - 1])
      throw std::invalid_argument("support indices must be sorted distinct");
  }
}

nlohmann::json RicReport::to_json() const {
  nlohmann::json j;
  j["delta_s"] = delta_s;
  j["theta_s"] = theta_s;
  j["indicator"] = std::isfinite(indicator) ? indicator : -1.0;
  j["indicator_finite"] = std::isfinite(indicator);
  j["exact"] = exact;
  j["tprime_count"] = tprime_count;
  return j;
}

double gram_deviation(const PolynomialBasis& basis,
                      const Eigen::MatrixXd& pts) {
  if (pts.cols() != basis.dimension())
    throw std::invalid_argument("point dimension mismatch");
  const int m = static_cast<int>(pts.rows());
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / m);
  Eigen::MatrixXd gram = empirical_gram(basis.indices, basis.coeffs, pts, w);
  gram.diagonal().array() -= 1.0;
  const Eigen::VectorXd evals =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues();
  return std::max(std::abs(evals.minCoeff()), std::abs(evals.maxCoeff()));
}

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::MatrixXd gram;
  if (m.rows() <= m.cols())
    gram = m * m.transpose();
  else
    gram = m.transpose() * m;
  const Eigen::VectorXd evals =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues();
  return std::sqrt(std::max(0.0, evals.maxCoeff()));
}

// Cross-coupling of a candidate complement subset against the support block:
// || B(rows, :) ||_2 where B = A_complement^T A_T.
double coupling(const Eigen::MatrixXd& B, const std::vector<int>& rows) {
  Eigen::MatrixXd sub(rows.size(), B.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    sub.row(static_cast<int>(i)) = B.row(rows[i]);
  return spectral_norm(sub);
}

std::int64_t binomial_capped(int n, int k, std::int64_t cap) {
  double v = 1.0;
  for (int j = 1; j <= k; ++j) {
    v *= static_cast<double>(n - k + j) / j;
    if (v > static_cast<double>(cap) * 2) return cap + 1;
  }
  return static_cast<std::int64_t>(v);
}

}  // namespace

RicReport ric_constants(const Eigen::MatrixXd& A, const SupportSpec& T,
                        std::int64_t budget, std::uint64_t seed) {
  const int n = static_cast<int>(A.cols());
  const int m = static_cast<int>(A.rows());
  T.validate(n);
  const int s = T.sparsity();
  if (s > m)
    throw std::invalid_argument("support larger than measurement count");

  Eigen::MatrixXd At(m, s);
  for (int i = 0; i < s; ++i) At.col(i) = A.col(T.indices[i]);

  RicReport report;
  {
    const Eigen::MatrixXd gram = At.transpose() * At;
    const Eigen::VectorXd evals =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues();
    report.delta_s =
        std::max(evals.maxCoeff() - 1.0, 1.0 - evals.minCoeff());
  }

  std::vector<int> complement;
  complement.reserve(n - s);
  {
    std::size_t next = 0;
    for (int j = 0; j < n; ++j) {
      if (next < T.indices.size() && T.indices[next] == j)
        ++next;
      else
        complement.push_back(j);
    }
  }
  const int nc = static_cast<int>(complement.size());
  if (nc == 0) {
    report.indicator = 0.0;
    report.exact = true;
    return report;
  }
  const int k = std::min(s, nc);

  // B rows are complement columns projected on the support block.
  Eigen::MatrixXd B(nc, s);
  for (int i = 0; i < nc; ++i)
    B.row(i) = A.col(complement[i]).transpose() * At;

  double theta = 0.0;
  const std::int64_t total = binomial_capped(nc, k, budget);
  if (total <= budget) {
    // Exhaustive enumeration of size-k subsets (larger candidates only grow
    // the norm, smaller ones are dominated).
    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) pick[i] = i;
    while (true) {
      theta = std::max(theta, coupling(B, pick));
      int j = k - 1;
      while (j >= 0 && pick[j] == nc - k + j) --j;
      if (j < 0) break;
      ++pick[j];
      for (int l = j + 1; l < k; ++l) pick[l] = pick[l - 1] + 1;
    }
    report.exact = true;
    report.tprime_count = total;
  } else {
    // Greedy growth from the strongest single row, then random restarts with
    // swap hill-climbing; a lower bound on the true maximum.
    std::int64_t evaluated = 0;
    auto improve = [&](std::vector<int> pick) {
      double best = coupling(B, pick);
      ++evaluated;
      bool moved = true;
      while (moved) {
        moved = false;
        for (std::size_t slot = 0; slot < pick.size() && !moved; ++slot) {
          for (int cand = 0; cand < nc; ++cand) {
            if (std::find(pick.begin(), pick.end(), cand) != pick.end())
              continue;
            std::vector<int> trial = pick;
            trial[slot] = cand;
            const double v = coupling(B, trial);
            ++evaluated;
            if (v > best + 1e-14) {
              best = v;
              pick = trial;
              moved = true;
              break;
            }
          }
        }
      }
      return std::make_pair(best, pick);
    };

    std::vector<int> greedy;
    std::vector<double> row_norms(nc);
    for (int i = 0; i < nc; ++i) row_norms[i] = B.row(i).norm();
    greedy.push_back(static_cast<int>(
        std::max_element(row_norms.begin(), row_norms.end()) -
        row_norms.begin()));
    while (static_cast<int>(greedy.size()) < k) {
      int best_cand = -1;
      double best_val = -1.0;
      for (int cand = 0; cand < nc; ++cand) {
        if (std::find(greedy.begin(), greedy.end(), cand) != greedy.end())
          continue;
        std::vector<int> trial = greedy;
        trial.push_back(cand);
        const double v = coupling(B, trial);
        ++evaluated;
        if (v > best_val) {
          best_val = v;
          best_cand = cand;
        }
      }
      greedy.push_back(best_cand);
    }
    std::sort(greedy.begin(), greedy.end());
    auto [best, best_pick] = improve(greedy);
    theta = best;

    Rng rng(derive_seed(seed, 0x7243));
    for (int restart = 0; restart < 64; ++restart) {
      std::vector<int> pick;
      while (static_cast<int>(pick.size()) < k) {
        const int cand = rng.uniform_int(nc);
        if (std::find(pick.begin(), pick.end(), cand) == pick.end())
          pick.push_back(cand);
      }
      std::sort(pick.begin(), pick.end());
      theta = std::max(theta, improve(pick).first);
    }
    report.exact = false;
    report.tprime_count = evaluated;
  }

  report.theta_s = theta;
  report.indicator = (report.delta_s < 1.0)
                         ? report.theta_s / (1.0 - report.delta_s)
                         : std::numeric_limits<double>::infinity();
  return report;
}

double basis_bound(const PolynomialBasis& basis, const SampleSet& S,
                   double m_sigma) {
  S.validate();
  if (S.dimension() != basis.dimension())
    throw std::invalid_argument("sample dimension mismatch");
  const int n = S.size();
  Eigen::VectorXd k(n);
  constexpr int chunk = 4096;
  for (int start = 0; start < n; start += chunk) {
    const int count = std::min(chunk, n - start);
    const Eigen::MatrixXd block =
        basis.evaluate_rows(S.points.middleRows(start, count));
    k.segment(start, count) = block.array().abs().rowwise().maxCoeff();
  }
  const double mean = k.mean();
  const double sd = std::sqrt((k.array() - mean).square().mean());

  double acc = 0.0;
  int tail = 0;
  for (int i = 0; i < n; ++i) {
    if (std::abs(k[i] - mean) > m_sigma * sd) {
      acc += k[i];
      ++tail;
    }
  }
  if (tail == 0) return k.maxCoeff();
  return acc / tail;
}

NullSpaceProbe null_space_probe(const Eigen::MatrixXd& A,
                                const SupportSpec& T, int count,
                                std::uint64_t seed, int per_vector_cap) {
  const int n = static_cast<int>(A.cols());
  T.validate(n);
  if (count < 1) throw std::invalid_argument("need count >= 1");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const double tol = std::max(A.rows(), A.cols()) *
                     svd.singularValues()[0] *
                     std::numeric_limits<double>::epsilon();
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++rank;
  const int kernel_dim = n - rank;
  if (kernel_dim <= 0)
    throw std::invalid_argument("measurement matrix has a trivial kernel");
  const Eigen::MatrixXd kernel = svd.matrixV().rightCols(kernel_dim);

  std::vector<char> on_support(n, 0);
  for (int i : T.indices) on_support[i] = 1;

  NullSpaceProbe probe;
  probe.requested = count;
  probe.vectors.resize(n, count);
  probe.sorted_profiles.resize(n, count);

  Rng rng(seed);
  int found = 0;
  while (found < count) {
    bool got = false;
    for (int attempt = 0; attempt < per_vector_cap; ++attempt) {
      Eigen::VectorXd v = kernel * rng.normal_vector(kernel_dim);
      v.normalize();
      double mass_t = 0.0, mass_c = 0.0;
      for (int i = 0; i < n; ++i)
        (on_support[i] ? mass_t : mass_c) += std::abs(v[i]);
      if (mass_t > mass_c) {
        probe.vectors.col(found) = v;
        Eigen::VectorXd profile = v.cwiseAbs();
        std::sort(profile.data(), profile.data() + n, std::greater<double>());
        probe.sorted_profiles.col(found) = profile;
        ++found;
        got = true;
        break;
      }
    }
    if (!got) {
      probe.shortfall = true;
      break;
    }
  }
  probe.vectors.conservativeResize(n, found);
  probe.sorted_profiles.conservativeResize(n, found);
  return probe;
}

}  // namespace apce
