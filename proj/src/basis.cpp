#include "apce/basis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace apce {

std::string to_string(BasisProvenance p) {
  switch (p) {
    case BasisProvenance::exact_discrete: return "exact_discrete";
    case BasisProvenance::exact_quadrature: return "exact_quadrature";
    case BasisProvenance::near_orthonormal: return "near_orthonormal";
    case BasisProvenance::classical: return "classical";
  }
  return "?";
}

BasisProvenance basis_provenance_from_string(const std::string& s) {
  if (s == "exact_discrete") return BasisProvenance::exact_discrete;
  if (s == "exact_quadrature") return BasisProvenance::exact_quadrature;
  if (s == "near_orthonormal") return BasisProvenance::near_orthonormal;
  if (s == "classical") return BasisProvenance::classical;
  throw std::invalid_argument("unknown basis provenance: " + s);
}

Eigen::VectorXd evaluate_monomials(const MultiIndexSet& idx,
                                   const Eigen::VectorXd& point) {
  if (point.size() != idx.dimension())
    throw std::invalid_argument("point dimension mismatch");
  Eigen::VectorXd m(idx.size());
  m[0] = 1.0;
  for (int k = 1; k < idx.size(); ++k)
    m[k] = m[idx.parent_position(k)] * point[idx.parent_dimension(k)];
  return m;
}

Eigen::MatrixXd monomial_rows(const MultiIndexSet& idx,
                              const Eigen::MatrixXd& pts) {
  if (pts.cols() != idx.dimension())
    throw std::invalid_argument("point dimension mismatch");
  Eigen::MatrixXd out(pts.rows(), idx.size());
  out.col(0).setOnes();
  for (int k = 1; k < idx.size(); ++k)
    out.col(k) = out.col(idx.parent_position(k)).array() *
                 pts.col(idx.parent_dimension(k)).array();
  return out;
}

namespace {
constexpr int kGramChunk = 4096;
}

Eigen::MatrixXd monomial_gram(const MultiIndexSet& idx,
                              const Eigen::MatrixXd& pts,
                              const Eigen::VectorXd& weights) {
  const int n = static_cast<int>(pts.rows());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(idx.size(), idx.size());
  for (int start = 0; start < n; start += kGramChunk) {
    const int count = std::min(kGramChunk, n - start);
    const Eigen::MatrixXd block =
        monomial_rows(idx, pts.middleRows(start, count));
    gram.noalias() += block.transpose() *
                      weights.segment(start, count).asDiagonal() * block;
  }
  if (!gram.allFinite())
    throw std::runtime_error("non-finite monomial Gram entries");
  return gram;
}

Eigen::MatrixXd empirical_gram(const MultiIndexSet& idx,
                               const Eigen::MatrixXd& coeffs,
                               const Eigen::MatrixXd& pts,
                               const Eigen::VectorXd& weights) {
  const int n = static_cast<int>(pts.rows());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(coeffs.rows(), coeffs.rows());
  for (int start = 0; start < n; start += kGramChunk) {
    const int count = std::min(kGramChunk, n - start);
    const Eigen::MatrixXd block =
        monomial_rows(idx, pts.middleRows(start, count)) * coeffs.transpose();
    gram.noalias() += block.transpose() *
                      weights.segment(start, count).asDiagonal() * block;
  }
  return gram;
}

Eigen::VectorXd PolynomialBasis::evaluate(const Eigen::VectorXd& point) const {
  Eigen::VectorXd values = coeffs * evaluate_monomials(indices, point);
  if (!values.allFinite())
    throw std::runtime_error("basis evaluation overflowed");
  return values;
}

Eigen::MatrixXd PolynomialBasis::evaluate_rows(const Eigen::MatrixXd& pts) const {
  Eigen::MatrixXd out(pts.rows(), size());
  for (int start = 0; start < pts.rows(); start += kGramChunk) {
    const int count = std::min<int>(kGramChunk, static_cast<int>(pts.rows()) - start);
    out.middleRows(start, count) =
        monomial_rows(indices, pts.middleRows(start, count)) *
        coeffs.transpose();
  }
  if (!out.allFinite())
    throw std::runtime_error("basis evaluation overflowed");
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Whitening shared by the discrete and quadrature constructions: Cholesky of
// the monomial Gram, inverted onto the monomial stack, then one
// re-orthogonalization pass against the Gram recomputed from evaluations.
Eigen::MatrixXd whiten_monomials(const MultiIndexSet& idx,
                                 const Eigen::MatrixXd& pts,
                                 const Eigen::VectorXd& weights) {
  Eigen::MatrixXd gram = monomial_gram(idx, pts, weights);
  // Treat the measure as exactly normalized so the constant row stays 1.
  gram /= gram(0, 0);
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "monomial Gram not positive definite; add samples or lower the "
        "degree");
  if (llt.rcond() < 1e-14)
    throw std::runtime_error(
        "monomial Gram condition estimate above 1e14; add samples or lower "
        "the degree");
  const int n = idx.size();
  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Identity(n, n);
  llt.matrixL().solveInPlace(coeffs);

  Eigen::MatrixXd check = empirical_gram(idx, coeffs, pts, weights);
  check /= check(0, 0);
  Eigen::LLT<Eigen::MatrixXd> refine(check);
  if (refine.info() == Eigen::Success) {
    refine.matrixL().solveInPlace(coeffs);
  }
  return coeffs;
}

}  // namespace

PolynomialBasis gram_schmidt_discrete(const SampleSet& S, int d, int p) {
  S.validate();
  if (S.dimension() != d)
    throw std::invalid_argument("sample dimension mismatch");
  MultiIndexSet idx(d, p);
  if (S.size() < idx.size())
    throw std::invalid_argument(
        "need at least as many samples as basis functions");
  PolynomialBasis basis{std::move(idx), {}, BasisProvenance::exact_discrete};
  basis.coeffs = whiten_monomials(basis.indices, S.points, S.weights);
  return basis;
}

PolynomialBasis gram_schmidt_quadrature(const QuadratureRule& rule,
                                        const Eigen::MatrixXd& map, int d,
                                        int p) {
  if (rule.dimension() != d)
    throw std::invalid_argument("rule dimension mismatch");
  if (rule.exactness_degree < 2 * p)
    throw std::invalid_argument(
        "quadrature exactness " + std::to_string(rule.exactness_degree) +
        " is below the required degree " + std::to_string(2 * p));
  Eigen::MatrixXd linear = map;
  if (linear.size() == 0) linear = Eigen::MatrixXd::Identity(d, d);
  if (linear.rows() != d || linear.cols() != d)
    throw std::invalid_argument("map must be d x d");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(linear);
  if (!lu.isInvertible())
    throw std::invalid_argument("map must be invertible");

  const Eigen::MatrixXd pts = rule.nodes * linear.transpose();
  PolynomialBasis basis{MultiIndexSet(d, p), {},
                        BasisProvenance::exact_quadrature};
  basis.coeffs = whiten_monomials(basis.indices, pts, rule.weights);
  return basis;
}

namespace {

// Orthonormal univariate coefficients up to degree p from the monic
// recurrence pi_{k+1} = (x - a_k) pi_k - b_k pi_{k-1}; row k holds the
// monomial coefficients of the degree-k orthonormal polynomial.
Eigen::MatrixXd classical_1d_coefficients(DensityKind family, int p) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
  switch (family) {
    case DensityKind::gaussian:
      for (int k = 1; k <= p; ++k) b[k] = static_cast<double>(k);
      break;
    case DensityKind::uniform:
      for (int k = 1; k <= p; ++k) {
        const double kk = k;
        b[k] = kk * kk / (4.0 * kk * kk - 1.0);
      }
      break;
    case DensityKind::arcsine:
      if (p >= 1) b[1] = 0.5;
      for (int k = 2; k <= p; ++k) b[k] = 0.25;
      break;
    case DensityKind::exponential:
      for (int k = 0; k <= p; ++k) a[k] = 2.0 * k + 1.0;
      for (int k = 1; k <= p; ++k) b[k] = static_cast<double>(k) * k;
      break;
  }
  Eigen::MatrixXd monic = Eigen::MatrixXd::Zero(p + 1, p + 1);
  monic(0, 0) = 1.0;
  if (p >= 1) {
    monic(1, 1) = 1.0;
    monic(1, 0) = -a[0];
  }
  for (int k = 1; k < p; ++k) {
    // x * pi_k shifts coefficients up one power.
    for (int j = 0; j <= k; ++j) monic(k + 1, j + 1) = monic(k, j);
    monic.row(k + 1) -= a[k] * monic.row(k);
    monic.row(k + 1) -= b[k] * monic.row(k - 1);
  }
  double squared_norm = 1.0;
  for (int k = 1; k <= p; ++k) {
    squared_norm *= b[k];
    monic.row(k) /= std::sqrt(squared_norm);
  }
  return monic;
}

}  // namespace

PolynomialBasis classical_basis(const std::vector<DensityKind>& per_dim,
                                int p) {
  const int d = static_cast<int>(per_dim.size());
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  std::vector<Eigen::MatrixXd> coeff_1d;
  coeff_1d.reserve(d);
  for (DensityKind kind : per_dim)
    coeff_1d.push_back(classical_1d_coefficients(kind, p));

  PolynomialBasis basis{MultiIndexSet(d, p), {}, BasisProvenance::classical};
  basis.classical_families = per_dim;
  const int n = basis.size();
  basis.coeffs = Eigen::MatrixXd::Zero(n, n);
  // Tensor products expand over componentwise-dominated sub-indices.
  std::vector<int> sub(d, 0);
  for (int k = 0; k < n; ++k) {
    const MultiIndex& alpha = basis.indices.at(k);
    std::fill(sub.begin(), sub.end(), 0);
    while (true) {
      double c = 1.0;
      for (int j = 0; j < d; ++j) c *= coeff_1d[j](alpha[j], sub[j]);
      if (c != 0.0) {
        MultiIndex beta(sub.begin(), sub.end());
        basis.coeffs(k, basis.indices.position_of(beta)) = c;
      }
      int j = d - 1;
      while (j >= 0 && sub[j] == alpha[j]) sub[j--] = 0;
      if (j < 0) break;
      ++sub[j];
    }
  }
  return basis;
}

PolynomialBasis classical_basis(DensityKind family, int d, int p) {
  return classical_basis(std::vector<DensityKind>(d, family), p);
}

Eigen::MatrixXd cross_validation_zeta(const SampleSet& S1, const SampleSet& S2,
                                      int d, int p) {
  const PolynomialBasis b1 = gram_schmidt_discrete(S1, d, p);
  const PolynomialBasis b2 = gram_schmidt_discrete(S2, d, p);
  const Eigen::MatrixXd cross1 =
      empirical_gram(b1.indices, b1.coeffs, S2.points, S2.weights);
  const Eigen::MatrixXd cross2 =
      empirical_gram(b2.indices, b2.coeffs, S1.points, S1.weights);
  const int n = b1.size();
  Eigen::MatrixXd zeta(n, n);
  const double scale = 1.0 / (2.0 * std::sqrt(2.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double target = (i == j) ? 1.0 : 0.0;
      zeta(i, j) = scale * (std::abs(cross1(i, j) - target) +
                            std::abs(cross2(i, j) - target));
    }
  }
  return zeta;
}

BasisGradient basis_gradient(const PolynomialBasis& basis) {
  const MultiIndexSet& idx = basis.indices;
  const int n = idx.size();
  const int d = idx.dimension();
  BasisGradient grad;
  grad.per_dim.assign(d, Eigen::MatrixXd::Zero(n, n));
  for (int k = 0; k < n; ++k) {
    for (int c = 0; c <= k; ++c) {
      const double v = basis.coeffs(k, c);
      if (v == 0.0) continue;
      const MultiIndex& beta = idx.at(c);
      for (int j = 0; j < d; ++j) {
        if (beta[j] == 0) continue;
        MultiIndex lower = beta;
        lower[j] -= 1;
        grad.per_dim[j](k, idx.position_of(lower)) += v * beta[j];
      }
    }
  }
  return grad;
}

void PolynomialBasis::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_stream(out);
}

void PolynomialBasis::write_stream(std::ostream& out) const {
  out << "apce-basis 1\n";
  out << "d " << dimension() << "\n";
  out << "p " << max_degree() << "\n";
  out << "provenance " << to_string(provenance) << "\n";
  if (provenance == BasisProvenance::classical) {
    out << "families";
    for (DensityKind kind : classical_families) out << ' ' << to_string(kind);
    out << "\n";
  }
  out << "fallback_rows " << fallback_rows << "\n";
  out << "indices " << size() << "\n";
  for (int k = 0; k < size(); ++k) {
    const MultiIndex& a = indices.at(k);
    for (int j = 0; j < dimension(); ++j) {
      if (j) out << ' ';
      out << a[j];
    }
    out << '\n';
  }
  out << "rows\n";
  for (int k = 0; k < size(); ++k) {
    for (int c = 0; c <= k; ++c) {
      if (c) out << ' ';
      out << format_double(coeffs(k, c));
    }
    out << '\n';
  }
}

PolynomialBasis PolynomialBasis::read_stream(std::istream& in,
                                             const std::string& what) {
  std::string token;
  int version = 0;
  in >> token >> version;
  if (token != "apce-basis" || version != 1)
    throw std::runtime_error("not a basis file: " + what);
  int d = 0, p = 0;
  std::string provenance_str;
  in >> token >> d;
  if (token != "d") throw std::runtime_error("bad basis file: " + what);
  in >> token >> p;
  if (token != "p") throw std::runtime_error("bad basis file: " + what);
  in >> token >> provenance_str;
  if (token != "provenance") throw std::runtime_error("bad basis file: " + what);

  PolynomialBasis basis{MultiIndexSet(d, p), {},
                        basis_provenance_from_string(provenance_str)};
  in >> token;
  if (token == "families") {
    basis.classical_families.resize(d);
    for (int j = 0; j < d; ++j) {
      std::string fam;
      in >> fam;
      basis.classical_families[j] = density_kind_from_string(fam);
    }
    in >> token;
  }
  if (token != "fallback_rows") throw std::runtime_error("bad basis file: " + what);
  in >> basis.fallback_rows;
  int count = 0;
  in >> token >> count;
  if (token != "indices" || count != basis.size())
    throw std::runtime_error("index count mismatch in " + what);
  for (int k = 0; k < count; ++k) {
    MultiIndex a(d);
    for (int j = 0; j < d; ++j) in >> a[j];
    if (a != basis.indices.at(k))
      throw std::runtime_error("index ordering mismatch in " + what);
  }
  in >> token;
  if (token != "rows") throw std::runtime_error("bad basis file: " + what);
  basis.coeffs = Eigen::MatrixXd::Zero(count, count);
  for (int k = 0; k < count; ++k)
    for (int c = 0; c <= k; ++c) in >> basis.coeffs(k, c);
  if (!in) throw std::runtime_error("truncated basis file: " + what);
  return basis;
}

PolynomialBasis PolynomialBasis::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_stream(in, path);
}

}  // namespace apce
