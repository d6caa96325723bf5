#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "apce/measure.hpp"

namespace apce {

namespace {

// Monic three-term recurrence pi_{k+1} = (x - a_k) pi_k - b_k pi_{k-1} for
// each family, probability-normalized (mu_0 = 1).
void recurrence_coefficients(DensityKind family, int n, Eigen::VectorXd& a,
                             Eigen::VectorXd& b) {
  a.setZero(n);
  b.setZero(n);  // b[0] unused
  switch (family) {
    case DensityKind::gaussian:
      for (int k = 1; k < n; ++k) b[k] = static_cast<double>(k);
      break;
    case DensityKind::uniform:
      for (int k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        b[k] = kk * kk / (4.0 * kk * kk - 1.0);
      }
      break;
    case DensityKind::arcsine:
      if (n > 1) b[1] = 0.5;
      for (int k = 2; k < n; ++k) b[k] = 0.25;
      break;
    case DensityKind::exponential:
      for (int k = 0; k < n; ++k) a[k] = 2.0 * k + 1.0;
      for (int k = 1; k < n; ++k) b[k] = static_cast<double>(k) * k;
      break;
  }
}

}  // namespace

QuadratureRule gauss_rule_1d(DensityKind family, int n) {
  if (n < 1) throw std::invalid_argument("quadrature needs >= 1 node");
  Eigen::VectorXd a, b;
  recurrence_coefficients(family, n, a, b);

  // Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights come
  // from the squared first components of the normalized eigenvectors.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) jacobi(k, k) = a[k];
  for (int k = 1; k < n; ++k) {
    const double off = std::sqrt(b[k]);
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("Jacobi matrix eigensolver did not converge");

  QuadratureRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  rule.exactness_degree = 2 * n - 1;
  return rule;
}

QuadratureRule tensor_rule(const std::vector<QuadratureRule>& rules_1d,
                           std::int64_t node_cap) {
  if (rules_1d.empty()) throw std::invalid_argument("no rules given");
  std::int64_t total = 1;
  for (const auto& r : rules_1d) {
    if (r.dimension() != 1)
      throw std::invalid_argument("tensor factors must be one-dimensional");
    total *= r.size();
    if (total > node_cap)
      throw std::runtime_error("tensor rule would need " +
                               std::to_string(total) +
                               "+ nodes, above the cap of " +
                               std::to_string(node_cap));
  }
  const int d = static_cast<int>(rules_1d.size());
  QuadratureRule rule;
  rule.nodes.resize(total, d);
  rule.weights.resize(total);
  std::vector<int> digit(d, 0);
  for (std::int64_t k = 0; k < total; ++k) {
    double w = 1.0;
    for (int j = 0; j < d; ++j) {
      rule.nodes(k, j) = rules_1d[j].nodes(digit[j], 0);
      w *= rules_1d[j].weights[digit[j]];
    }
    rule.weights[k] = w;
    for (int j = d - 1; j >= 0; --j) {
      if (++digit[j] < rules_1d[j].size()) break;
      digit[j] = 0;
    }
  }
  rule.exactness_degree = rules_1d[0].exactness_degree;
  for (const auto& r : rules_1d)
    rule.exactness_degree = std::min(rule.exactness_degree, r.exactness_degree);
  return rule;
}

namespace {

// All i >= 1 (componentwise) with |i| = total, in a fixed order.
void compositions(int total, int d, std::vector<int>& scratch, int dim,
                  std::vector<std::vector<int>>& out) {
  if (dim == d - 1) {
    scratch[dim] = total;
    out.push_back(scratch);
    return;
  }
  for (int e = total - (d - dim - 1); e >= 1; --e) {
    scratch[dim] = e;
    compositions(total - e, d, scratch, dim + 1, out);
  }
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

}  // namespace

QuadratureRule smolyak_rule(DensityKind family, int d, int level,
                            std::int64_t node_cap) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (level < 0) throw std::invalid_argument("level must be >= 0");

  const int q = d + level;
  std::vector<QuadratureRule> rules_1d;  // rules_1d[i] has i+1 nodes
  for (int i = 0; i <= level; ++i)
    rules_1d.push_back(gauss_rule_1d(family, i + 1));

  // Combination formula over |i| in [max(d, q-d+1), q], coefficient
  // (-1)^(q-|i|) C(d-1, q-|i|).
  std::vector<std::pair<Eigen::VectorXd, double>> raw;
  std::int64_t raw_count = 0;
  for (int total = std::max(d, q - d + 1); total <= q; ++total) {
    const double coeff = ((q - total) % 2 ? -1.0 : 1.0) *
                         static_cast<double>(binomial(d - 1, q - total));
    if (coeff == 0.0) continue;
    std::vector<std::vector<int>> multi;
    std::vector<int> scratch(d, 0);
    compositions(total, d, scratch, 0, multi);
    for (const auto& idx : multi) {
      std::int64_t count = 1;
      for (int j = 0; j < d; ++j) count *= idx[j];
      raw_count += count;
      if (raw_count > node_cap)
        throw std::runtime_error("sparse grid would need " +
                                 std::to_string(raw_count) +
                                 "+ nodes, above the cap of " +
                                 std::to_string(node_cap));
      std::vector<int> digit(d, 0);
      for (std::int64_t k = 0; k < count; ++k) {
        Eigen::VectorXd node(d);
        double w = coeff;
        for (int j = 0; j < d; ++j) {
          const auto& r = rules_1d[idx[j] - 1];
          node[j] = r.nodes(digit[j], 0);
          w *= r.weights[digit[j]];
        }
        raw.emplace_back(std::move(node), w);
        for (int j = d - 1; j >= 0; --j) {
          if (++digit[j] < idx[j]) break;
          digit[j] = 0;
        }
      }
    }
  }

  // Merge nodes closer than 1e-12 in max-norm (non-nested Gauss grids repeat
  // points, e.g. the origin of every odd rule).
  std::sort(raw.begin(), raw.end(), [](const auto& x, const auto& y) {
    for (int j = 0; j < x.first.size(); ++j) {
      if (x.first[j] < y.first[j] - 1e-12) return true;
      if (x.first[j] > y.first[j] + 1e-12) return false;
    }
    return false;
  });
  std::vector<std::pair<Eigen::VectorXd, double>> merged;
  for (auto& entry : raw) {
    if (!merged.empty() &&
        (merged.back().first - entry.first).lpNorm<Eigen::Infinity>() < 1e-12)
      merged.back().second += entry.second;
    else
      merged.push_back(std::move(entry));
  }

  QuadratureRule rule;
  rule.nodes.resize(static_cast<int>(merged.size()), d);
  rule.weights.resize(static_cast<int>(merged.size()));
  for (std::size_t k = 0; k < merged.size(); ++k) {
    rule.nodes.row(static_cast<int>(k)) = merged[k].first.transpose();
    rule.weights[static_cast<int>(k)] = merged[k].second;
  }
  rule.exactness_degree = 2 * level + 1;
  return rule;
}

}  // namespace apce
