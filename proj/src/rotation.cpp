#include "apce/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace apce {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void Surrogate::validate() const {
  const int d = dimension();
  if (coefficients.size() != basis.size())
    throw std::invalid_argument("coefficient length mismatch");
  if (rotation.rows() != d || rotation.cols() != d)
    throw std::invalid_argument("rotation shape mismatch");
  if ((rotation.transpose() * rotation - Eigen::MatrixXd::Identity(d, d))
          .lpNorm<Eigen::Infinity>() > 1e-10)
    throw std::invalid_argument("rotation is not orthogonal");
  if (input_shift.size() != d || input_scale.size() != d)
    throw std::invalid_argument("input chain shape mismatch");
  if ((input_scale.array() == 0).any())
    throw std::invalid_argument("zero input scale");
}

Eigen::MatrixXd Surrogate::to_basis_inputs(const Eigen::MatrixXd& pts) const {
  Eigen::MatrixXd u = pts * rotation;  // rows become (Q^T x)^T
  u.rowwise() -= input_shift.transpose();
  u.array().rowwise() /= input_scale.transpose().array();
  return u;
}

double Surrogate::evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v =
      ((rotation.transpose() * x) - input_shift).cwiseQuotient(input_scale);
  return coefficients.dot(basis.evaluate(v));
}

Eigen::VectorXd Surrogate::evaluate_rows(const Eigen::MatrixXd& pts) const {
  return basis.evaluate_rows(to_basis_inputs(pts)) * coefficients;
}

namespace {

Surrogate make_surrogate(PolynomialBasis basis, Eigen::VectorXd coeffs,
                         Eigen::MatrixXd rotation, Eigen::VectorXd shift,
                         Eigen::VectorXd scale, const RecoveryResult& fit,
                         double sigma, int training_count) {
  Surrogate s;
  s.basis = std::move(basis);
  s.coefficients = std::move(coeffs);
  s.rotation = std::move(rotation);
  s.input_shift = std::move(shift);
  s.input_scale = std::move(scale);
  s.fit.training_count = training_count;
  s.fit.sigma = sigma;
  s.fit.iterations = fit.iterations;
  s.fit.converged = fit.converged;
  s.fit.residual_l2 = fit.residual_l2;
  return s;
}

}  // namespace

Eigen::MatrixXd gradient_matrix_cached(const Surrogate& s,
                                       const BasisGradient& grad,
                                       const Eigen::MatrixXd& mono_gram) {
  if (s.basis.max_degree() < 1)
    throw std::invalid_argument("gradient needs degree >= 1");
  const int d = s.dimension();
  Eigen::MatrixXd directions(s.basis.size(), d);
  for (int j = 0; j < d; ++j)
    directions.col(j) = grad.per_dim[j].transpose() * s.coefficients;

  Eigen::MatrixXd inner = directions.transpose() * mono_gram * directions;
  inner = 0.5 * (inner + inner.transpose());

  // Chain rule back to the original coordinates.
  const Eigen::MatrixXd jac =
      s.rotation * s.input_scale.cwiseInverse().asDiagonal();
  Eigen::MatrixXd G = jac * inner * jac.transpose();
  return 0.5 * (G + G.transpose());
}

namespace {

Eigen::MatrixXd gradient_matrix_impl(const Surrogate& s,
                                     const Eigen::MatrixXd& pts,
                                     const Eigen::VectorXd& weights) {
  const BasisGradient grad = basis_gradient(s.basis);
  const Eigen::MatrixXd v = s.to_basis_inputs(pts);
  const Eigen::MatrixXd mono_gram = monomial_gram(s.basis.indices, v, weights);
  return gradient_matrix_cached(s, grad, mono_gram);
}

}  // namespace

Eigen::MatrixXd gradient_matrix(const Surrogate& s, const SampleSet& m) {
  return gradient_matrix_impl(s, m.points, m.weights);
}

Eigen::MatrixXd gradient_matrix(const Surrogate& s, const QuadratureRule& m) {
  return gradient_matrix_impl(s, m.nodes, m.weights);
}

Eigen::MatrixXd rotation_from_gradient(const Eigen::MatrixXd& G,
                                       Eigen::VectorXd* eigenvalues) {
  if (G.rows() != G.cols())
    throw std::invalid_argument("gradient matrix must be square");
  if ((G - G.transpose()).lpNorm<Eigen::Infinity>() >
      1e-12 * std::max(1.0, G.lpNorm<Eigen::Infinity>()))
    throw std::invalid_argument("gradient matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("gradient eigendecomposition failed");
  const int d = static_cast<int>(G.rows());
  if (eig.eigenvalues()[0] < -1e-10 * std::max(1.0, eig.eigenvalues()[d - 1]))
    throw std::invalid_argument("gradient matrix is not positive semidefinite");

  // Stable descending sort keeps the original order on ties, so G = I maps
  // to Q = I under the sign convention.
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return eig.eigenvalues()[a] > eig.eigenvalues()[b];
  });

  Eigen::MatrixXd Q(d, d);
  Eigen::VectorXd k(d);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd col = eig.eigenvectors().col(order[j]);
    int arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0) col = -col;
    Q.col(j) = col;
    k[j] = std::max(eig.eigenvalues()[order[j]], 0.0);
  }
  if (eigenvalues) *eigenvalues = k;
  return Q;
}

BasisType basis_type_from_string(const std::string& s) {
  if (s == "exact") return BasisType::exact;
  if (s == "near") return BasisType::near;
  if (s == "classical") return BasisType::classical;
  throw std::invalid_argument("unknown basis type: " + s);
}

namespace {

// Per-dimension affine chain for classical bases on sampled data: map to
// [-1,1] for bounded families, standardize for the Gaussian one.
void classical_scaling(DensityKind family, const Eigen::MatrixXd& pts,
                       Eigen::VectorXd& shift, Eigen::VectorXd& scale) {
  const int d = static_cast<int>(pts.cols());
  shift.resize(d);
  scale.resize(d);
  if (family == DensityKind::gaussian) {
    for (int j = 0; j < d; ++j) {
      const double mean = pts.col(j).mean();
      const double var = (pts.col(j).array() - mean).square().mean();
      shift[j] = mean;
      scale[j] = std::max(std::sqrt(var), 1e-12);
    }
  } else {
    for (int j = 0; j < d; ++j) {
      const double lo = pts.col(j).minCoeff();
      const double hi = pts.col(j).maxCoeff();
      shift[j] = 0.5 * (hi + lo);
      scale[j] = std::max(0.5 * (hi - lo), 1e-12);
    }
  }
}

RecoveryResult run_solver(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                          const FitOptions& options) {
  RecoverySetup setup;
  setup.A = A;
  setup.b = b;
  setup.sigma = options.sigma;
  return options.sigma > 0 ? bpdn(setup, options.solver)
                           : basis_pursuit(setup, options.solver);
}

}  // namespace

PipelineResult fit_discrete(const SampleSet& S,
                            const Eigen::MatrixXd& training_points,
                            const Eigen::VectorXd& training_values, int p,
                            const FitOptions& options) {
  S.validate();
  const int d = S.dimension();
  if (training_points.cols() != d)
    throw std::invalid_argument("training dimension mismatch");
  if (training_values.size() != training_points.rows())
    throw std::invalid_argument("training value count mismatch");
  const int m = static_cast<int>(training_points.rows());

  auto build = [&](const Eigen::MatrixXd& sample_pts,
                   const Eigen::MatrixXd& rotation) -> Surrogate {
    PolynomialBasis basis;
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(d);
    SampleSet rotated = SampleSet{sample_pts, S.weights};
    switch (options.basis_type) {
      case BasisType::exact:
        basis = gram_schmidt_discrete(rotated, d, p);
        break;
      case BasisType::near:
        basis = near_orthonormal(rotated, d, p, options.near_mode);
        break;
      case BasisType::classical: {
        basis = classical_basis(options.classical_family, d, p);
        if (options.rescale_classical)
          classical_scaling(options.classical_family, sample_pts, shift,
                            scale);
        break;
      }
    }
    Eigen::MatrixXd train_rot = training_points * rotation;
    train_rot.rowwise() -= shift.transpose();
    train_rot.array().rowwise() /= scale.transpose().array();
    const Eigen::MatrixXd A = assemble_measurement_matrix(basis, train_rot);
    const RecoveryResult fit = run_solver(A, training_values, options);
    return make_surrogate(std::move(basis), fit.c, rotation, shift, scale, fit,
                          options.sigma, m);
  };

  PipelineResult result;
  result.unrotated = build(S.points, Eigen::MatrixXd::Identity(d, d));

  Surrogate current = result.unrotated;
  for (int it = 0; it < std::max(1, options.rotation_iterations); ++it) {
    result.gradient = gradient_matrix(current, S);
    const Eigen::MatrixXd Q =
        rotation_from_gradient(result.gradient, &result.gradient_spectrum);
    current = build(S.points * Q, Q);
  }
  result.rotated = std::move(current);
  return result;
}

PipelineResult fit_density(const Eigen::MatrixXd& training_points,
                           const Eigen::VectorXd& training_values,
                           const std::vector<DensityKind>& density, int p,
                           const FitOptions& options, bool rebuild) {
  const int d = static_cast<int>(density.size());
  if (training_points.cols() != d)
    throw std::invalid_argument("training dimension mismatch");
  if (training_values.size() != training_points.rows())
    throw std::invalid_argument("training value count mismatch");
  const int m = static_cast<int>(training_points.rows());
  const bool mixed =
      std::adjacent_find(density.begin(), density.end(),
                         std::not_equal_to<>()) != density.end();

  // Quadrature for the density: tensor rule in low dimension, sparse grid
  // otherwise (single-family case). Exactness 2p covers every Gram needed.
  QuadratureRule rule;
  const double tensor_nodes = std::pow(static_cast<double>(p + 1), d);
  if (tensor_nodes <= 200000.0) {
    std::vector<QuadratureRule> rules;
    rules.reserve(d);
    for (DensityKind kind : density) rules.push_back(gauss_rule_1d(kind, p + 1));
    rule = tensor_rule(rules);
  } else if (!mixed) {
    rule = smolyak_rule(density[0], d, p);
  } else {
    throw std::invalid_argument(
        "mixed-family density in high dimension has no quadrature rule here");
  }

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);

  PipelineResult result;
  {
    PolynomialBasis basis = classical_basis(density, p);
    const Eigen::MatrixXd A =
        assemble_measurement_matrix(basis, training_points);
    const RecoveryResult fit = run_solver(A, training_values, options);
    result.unrotated = make_surrogate(std::move(basis), fit.c, identity, zero,
                                      ones, fit, options.sigma, m);
  }

  Surrogate current = result.unrotated;
  for (int it = 0; it < std::max(1, options.rotation_iterations); ++it) {
    result.gradient = gradient_matrix(current, rule);
    const Eigen::MatrixXd Q =
        rotation_from_gradient(result.gradient, &result.gradient_spectrum);
    PolynomialBasis basis =
        rebuild ? gram_schmidt_quadrature(rule, Q.transpose(), d, p)
                : classical_basis(density, p);
    const Eigen::MatrixXd train_rot = training_points * Q;
    const Eigen::MatrixXd A = assemble_measurement_matrix(basis, train_rot);
    const RecoveryResult fit = run_solver(A, training_values, options);
    current = make_surrogate(std::move(basis), fit.c, Q, zero, ones, fit,
                             options.sigma, m);
  }
  result.rotated = std::move(current);
  return result;
}

void Surrogate::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "apce-surrogate 1\n";
  const int d = dimension();
  out << "rotation " << d << "\n";
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (j) out << ' ';
      out << format_double(rotation(i, j));
    }
    out << '\n';
  }
  out << "shift";
  for (int j = 0; j < d; ++j) out << ' ' << format_double(input_shift[j]);
  out << "\nscale";
  for (int j = 0; j < d; ++j) out << ' ' << format_double(input_scale[j]);
  out << "\ncoefficients " << coefficients.size() << "\n";
  for (int i = 0; i < coefficients.size(); ++i)
    out << format_double(coefficients[i]) << '\n';
  out << "fit " << fit.training_count << ' ' << format_double(fit.sigma) << ' '
      << fit.iterations << ' ' << (fit.converged ? 1 : 0) << ' '
      << format_double(fit.residual_l2) << "\n";
  basis.write_stream(out);
}

Surrogate Surrogate::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string token;
  int version = 0;
  in >> token >> version;
  if (token != "apce-surrogate" || version != 1)
    throw std::runtime_error("not a surrogate file: " + path);
  Surrogate s;
  int d = 0;
  in >> token >> d;
  if (token != "rotation") throw std::runtime_error("bad surrogate file");
  s.rotation.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) in >> s.rotation(i, j);
  in >> token;
  if (token != "shift") throw std::runtime_error("bad surrogate file");
  s.input_shift.resize(d);
  for (int j = 0; j < d; ++j) in >> s.input_shift[j];
  in >> token;
  if (token != "scale") throw std::runtime_error("bad surrogate file");
  s.input_scale.resize(d);
  for (int j = 0; j < d; ++j) in >> s.input_scale[j];
  int n = 0;
  in >> token >> n;
  if (token != "coefficients") throw std::runtime_error("bad surrogate file");
  s.coefficients.resize(n);
  for (int i = 0; i < n; ++i) in >> s.coefficients[i];
  int conv = 0;
  in >> token >> s.fit.training_count >> s.fit.sigma >> s.fit.iterations >>
      conv >> s.fit.residual_l2;
  if (token != "fit") throw std::runtime_error("bad surrogate file");
  s.fit.converged = conv != 0;
  s.basis = PolynomialBasis::read_stream(in, path);
  s.validate();
  return s;
}

}  // namespace apce
