#include "apce/problems.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>

#include "apce/rng.hpp"

namespace apce {

double MonomialTarget::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != dimension)
    throw std::invalid_argument("point dimension mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < support.size(); ++t) {
    double term = coefficients[static_cast<int>(t)];
    for (int j = 0; j < dimension; ++j)
      for (int e = 0; e < support[t][j]; ++e) term *= x[j];
    acc += term;
  }
  return acc;
}

Eigen::VectorXd MonomialTarget::evaluate_rows(const Eigen::MatrixXd& pts) const {
  Eigen::VectorXd out(pts.rows());
  for (int i = 0; i < pts.rows(); ++i) out[i] = evaluate(pts.row(i));
  return out;
}

CoeffMode coeff_mode_from_string(const std::string& s) {
  if (s == "ones") return CoeffMode::ones;
  if (s == "lognormal") return CoeffMode::lognormal;
  if (s == "decay") return CoeffMode::decay;
  throw std::invalid_argument("unknown coefficient mode: " + s);
}

MonomialTarget sparse_monomial_target(int d, int p, int s, CoeffMode mode,
                                      std::uint64_t seed) {
  MultiIndexSet idx(d, p);
  const int n = idx.size();
  MonomialTarget target;
  target.dimension = d;
  Rng rng(derive_seed(seed, 0x7467));

  if (mode == CoeffMode::decay) {
    // Full support with algebraically decaying random coefficients,
    // c_i = eta_i / i^1.5 over the 1-based single index.
    target.support = idx.ordered();
    target.coefficients.resize(n);
    for (int i = 0; i < n; ++i)
      target.coefficients[i] =
          rng.uniform01() / std::pow(static_cast<double>(i + 1), 1.5);
    return target;
  }

  if (s < 1 || s > n)
    throw std::invalid_argument("support size out of range");
  // Partial Fisher-Yates draw of s positions.
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < s; ++i) {
    const int j = i + rng.uniform_int(n - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> chosen(pool.begin(), pool.begin() + s);
  std::sort(chosen.begin(), chosen.end());

  target.support.reserve(s);
  for (int k : chosen) target.support.push_back(idx.at(k));
  target.coefficients.resize(s);
  for (int i = 0; i < s; ++i) {
    switch (mode) {
      case CoeffMode::ones:
        target.coefficients[i] = 1.0;
        break;
      case CoeffMode::lognormal:
        target.coefficients[i] = std::exp(std::sqrt(2.0) * rng.normal());
        break;
      default:
        break;
    }
  }
  return target;
}

namespace {

// Bisection to 1e-12 on a bracketed root.
double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw std::runtime_error("root bracket failure in KL frequency solve");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0 || hi - lo < 1e-12) return mid;
    if (flo * fm < 0.0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

KLExpansion kl_exponential(double l_c, double sigma, int d) {
  if (l_c <= 0) throw std::invalid_argument("correlation length must be > 0");
  if (d < 1) throw std::invalid_argument("need at least one mode");

  KLExpansion kl;
  kl.correlation_length = l_c;
  kl.amplitude = sigma;
  kl.mean_value = 0.0;

  // Frequencies on [0,1]: even branch tan(w/2) = 1/(l_c w), odd branch
  // tan(w/2) = -l_c w; one root per half-period of tan, interleaved even /
  // odd as w grows, eigenvalues 2 l_c / (l_c^2 w^2 + 1) decreasing.
  const double eps = 1e-9;
  std::vector<double> omegas;
  std::vector<bool> evens;
  int block = 0;
  while (static_cast<int>(omegas.size()) < d) {
    {
      // even root with w/2 in (block*pi, block*pi + pi/2)
      const double lo = 2.0 * block * M_PI + eps;
      const double hi = 2.0 * block * M_PI + M_PI - eps;
      auto f = [&](double w) { return std::tan(w / 2.0) - 1.0 / (l_c * w); };
      omegas.push_back(bisect(f, std::max(lo, eps), hi));
      evens.push_back(true);
    }
    if (static_cast<int>(omegas.size()) == d) break;
    {
      // odd root with w/2 in (block*pi + pi/2, (block+1)*pi)
      const double lo = (2.0 * block + 1.0) * M_PI + eps;
      const double hi = (2.0 * block + 2.0) * M_PI - eps;
      auto f = [&](double w) { return std::tan(w / 2.0) + l_c * w; };
      omegas.push_back(bisect(f, lo, hi));
      evens.push_back(false);
    }
    ++block;
  }

  kl.eigenvalues.resize(d);
  kl.modes.resize(d);
  for (int i = 0; i < d; ++i) {
    const double w = omegas[i];
    kl.eigenvalues[i] = 2.0 * l_c / (l_c * l_c * w * w + 1.0);
    kl.modes[i].even = evens[i];
    kl.modes[i].omega = w;
    const double s = std::sin(w) / (2.0 * w);
    kl.modes[i].normalization =
        1.0 / std::sqrt(evens[i] ? 0.5 + s : 0.5 - s);
  }
  for (int i = 1; i < d; ++i)
    if (kl.eigenvalues[i] > kl.eigenvalues[i - 1])
      throw std::runtime_error("KL eigenvalues not descending");
  return kl;
}

double KLExpansion::eigenfunction(int i, double x) const {
  const Mode& m = modes.at(i);
  const double arg = m.omega * (x - 0.5);
  return m.normalization * (m.even ? std::cos(arg) : std::sin(arg));
}

double KLExpansion::log_field(double x, const Eigen::VectorXd& xi) const {
  if (xi.size() != count())
    throw std::invalid_argument("realization length mismatch");
  double a = mean_value;
  for (int i = 0; i < count(); ++i)
    a += amplitude * std::sqrt(eigenvalues[i]) * eigenfunction(i, x) * xi[i];
  return a;
}

Eigen::VectorXd nystrom_eigenvalues(double l_c, int n_points, int count) {
  if (n_points < count)
    throw std::invalid_argument("need more grid points than eigenvalues");
  const double h = 1.0 / n_points;
  Eigen::MatrixXd kernel(n_points, n_points);
  for (int i = 0; i < n_points; ++i) {
    const double xi = (i + 0.5) * h;
    for (int j = 0; j <= i; ++j) {
      const double xj = (j + 0.5) * h;
      kernel(i, j) = kernel(j, i) = std::exp(-std::abs(xi - xj) / l_c);
    }
  }
  const Eigen::VectorXd evals =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h * kernel)
          .eigenvalues();
  return evals.tail(count).reverse();
}

namespace {

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGaussNodes[8] = {
    -0.96028985649753623, -0.79666647741362674, -0.52553240991632899,
    -0.18343464249564980, 0.18343464249564980,  0.52553240991632899,
    0.79666647741362674,  0.96028985649753623};
constexpr double kGaussWeights[8] = {
    0.10122853629037626, 0.22238103445337447, 0.31370664587788729,
    0.36268378337836198, 0.36268378337836198, 0.31370664587788729,
    0.22238103445337447, 0.10122853629037626};

// Composite 8-point Gauss integral of g over [0, upper].
template <typename F>
double panel_integrate(const F& g, double upper, int total_points) {
  const int panels = std::max(1, total_points / 8);
  const double width = upper / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double left = p * width;
    for (int q = 0; q < 8; ++q) {
      const double x = left + 0.5 * width * (1.0 + kGaussNodes[q]);
      acc += 0.5 * width * kGaussWeights[q] * g(x);
    }
  }
  return acc;
}

}  // namespace

double elliptic_solve(const KLExpansion& kl, const Eigen::VectorXd& xi,
                      double x_star, int quad_n) {
  if (x_star < 0.0 || x_star > 1.0)
    throw std::invalid_argument("evaluation point outside [0,1]");
  if (quad_n < 64) throw std::invalid_argument("quad_n must be >= 64");

  auto inv_diffusivity = [&](double x) {
    const double a = kl.log_field(x, xi);
    const double D = std::exp(a);
    if (!std::isfinite(D) || D <= 0.0)
      throw std::runtime_error("diffusivity overflow at x = " +
                               std::to_string(x));
    return 1.0 / D;
  };

  // Flux constant from u(1) = 0: D u' = C - x, so
  // C = (int y/D) / (int 1/D) over [0,1].
  const double num =
      panel_integrate([&](double y) { return y * inv_diffusivity(y); }, 1.0,
                      quad_n);
  const double den = panel_integrate(inv_diffusivity, 1.0, quad_n);
  const double flux = num / den;

  if (x_star == 0.0) return 0.0;
  return panel_integrate(
      [&](double y) { return (flux - y) * inv_diffusivity(y); }, x_star,
      quad_n);
}

SampleSet dependent_input_sampler(const GaussianMixtureSpec& spec, int n,
                                  std::uint64_t seed, AffineMap* transform) {
  const SampleSet raw = sample_gaussian_mixture(spec, n, seed);
  WhitenResult white = pca_whiten(raw);
  if (transform) *transform = white.transform;
  return std::move(white.whitened);
}

namespace {

double param_double(const TargetParams& params, const std::string& key,
                    double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : std::stod(it->second);
}

int param_int(const TargetParams& params, const std::string& key,
              int fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : std::stoi(it->second);
}

std::string param_string(const TargetParams& params, const std::string& key,
                         const std::string& fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

TargetFunction make_target(const std::string& name, const TargetParams& params,
                           int d, int p, std::uint64_t seed) {
  TargetFunction target;
  target.name = name;
  if (name == "sparse_monomial") {
    const int terms = param_int(params, "terms", 5);
    const CoeffMode mode =
        coeff_mode_from_string(param_string(params, "coeff", "ones"));
    auto poly = std::make_shared<MonomialTarget>(
        sparse_monomial_target(d, p, terms, mode, seed));
    target.fn = [poly](const Eigen::VectorXd& x) { return poly->evaluate(x); };
  } else if (name == "decay_monomial") {
    auto poly = std::make_shared<MonomialTarget>(
        sparse_monomial_target(d, p, 0, CoeffMode::decay, seed));
    target.fn = [poly](const Eigen::VectorXd& x) { return poly->evaluate(x); };
  } else if (name == "elliptic_kl") {
    const double l_c = param_double(params, "corr_length", 0.12);
    const double sigma = param_double(params, "amplitude", 1.0);
    const double a0 = param_double(params, "mean", 1.0);
    const double x_star = param_double(params, "x_star", 0.35);
    const int quad_n = param_int(params, "quad_n", 512);
    auto kl = std::make_shared<KLExpansion>(kl_exponential(l_c, sigma, d));
    kl->mean_value = a0;
    target.fn = [kl, x_star, quad_n](const Eigen::VectorXd& x) {
      return elliptic_solve(*kl, x, x_star, quad_n);
    };
  } else if (name == "linear_sum") {
    const int terms = param_int(params, "terms", d);
    if (terms < 1 || terms > d)
      throw std::invalid_argument("linear_sum terms out of range");
    target.fn = [terms](const Eigen::VectorXd& x) {
      return x.head(terms).sum();
    };
  } else {
    throw std::invalid_argument("unknown target: " + name);
  }
  return target;
}

std::vector<std::pair<std::string, std::string>> registered_targets() {
  return {
      {"sparse_monomial",
       "random monomial support; params: terms, coeff=ones|lognormal"},
      {"decay_monomial", "all indices with coefficients eta_i / i^1.5"},
      {"elliptic_kl",
       "1D elliptic solution functional; params: corr_length, amplitude, "
       "mean, x_star, quad_n"},
      {"linear_sum", "sum of the first `terms` coordinates"},
      {"basis_function",
       "one basis function of the constructed basis; params: index"},
  };
}

}  // namespace apce
