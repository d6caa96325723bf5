#include "apce/measure.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "apce/rng.hpp"

namespace apce {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SampleSet SampleSet::from_points(Eigen::MatrixXd pts) {
  SampleSet s;
  const int n = static_cast<int>(pts.rows());
  if (n == 0) throw std::invalid_argument("empty sample set");
  s.points = std::move(pts);
  s.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  return s;
}

void SampleSet::validate() const {
  if (points.rows() == 0 || points.cols() == 0)
    throw std::invalid_argument("empty sample set");
  if (weights.size() != points.rows())
    throw std::invalid_argument("weight count does not match point count");
  if ((weights.array() < 0).any())
    throw std::invalid_argument("negative sample weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("sample weights must sum to 1");
  if (!points.allFinite())
    throw std::invalid_argument("non-finite sample point");
}

std::pair<SampleSet, SampleSet> SampleSet::halves() const {
  const int n = size();
  if (n < 2) throw std::invalid_argument("cannot split fewer than 2 samples");
  const int h = n / 2;
  SampleSet a = from_points(points.topRows(h));
  SampleSet b = from_points(points.bottomRows(n - h));
  return {std::move(a), std::move(b)};
}

SampleSet SampleSet::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty sample file " + path);
  if (line.rfind("dim=", 0) != 0)
    throw std::runtime_error("missing dim= header in " + path);
  const int d = std::stoi(line.substr(4));
  if (d < 1) throw std::runtime_error("bad dimension in " + path);

  std::vector<double> values;
  std::vector<double> weights;
  int rows = 0;
  bool has_weights = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() == static_cast<std::size_t>(d)) {
      if (has_weights)
        throw std::runtime_error("inconsistent weight column in " + path);
    } else if (row.size() == static_cast<std::size_t>(d + 1)) {
      if (rows > 0 && !has_weights)
        throw std::runtime_error("inconsistent weight column in " + path);
      has_weights = true;
      weights.push_back(row.back());
      row.pop_back();
    } else {
      throw std::runtime_error("bad column count in " + path);
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("no samples in " + path);

  SampleSet s;
  s.points.resize(rows, d);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < d; ++j) s.points(i, j) = values[i * d + j];
  if (has_weights) {
    s.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), rows);
    const double total = s.weights.sum();
    if (total <= 0) throw std::runtime_error("weights sum to zero in " + path);
    s.weights /= total;
  } else {
    s.weights = Eigen::VectorXd::Constant(rows, 1.0 / rows);
  }
  s.validate();
  return s;
}

void SampleSet::write_csv(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "dim=" << dimension() << "\n";
  const bool uniform =
      (weights.array() - 1.0 / size()).abs().maxCoeff() < 1e-15;
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < dimension(); ++j) {
      if (j) out << ',';
      out << format_double(points(i, j));
    }
    if (!uniform) out << ',' << format_double(weights[i]);
    out << '\n';
  }
}

DensityKind density_kind_from_string(const std::string& name) {
  if (name == "gaussian") return DensityKind::gaussian;
  if (name == "uniform") return DensityKind::uniform;
  if (name == "arcsine") return DensityKind::arcsine;
  if (name == "exponential") return DensityKind::exponential;
  throw std::invalid_argument("unknown density family: " + name);
}

std::string to_string(DensityKind kind) {
  switch (kind) {
    case DensityKind::gaussian: return "gaussian";
    case DensityKind::uniform: return "uniform";
    case DensityKind::arcsine: return "arcsine";
    case DensityKind::exponential: return "exponential";
  }
  return "?";
}

void GaussianMixtureSpec::validate() const {
  const int nm = mode_count();
  if (nm < 1) throw std::invalid_argument("mixture needs at least one mode");
  if (mode_weights.size() != nm ||
      static_cast<int>(covariances.size()) != nm)
    throw std::invalid_argument("mixture field sizes disagree");
  if ((mode_weights.array() <= 0).any())
    throw std::invalid_argument("mixture weights must be positive");
  if (std::abs(mode_weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixture weights must sum to 1");
  const int d = dimension();
  Eigen::VectorXd centered = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < nm; ++i) {
    if (means[i].size() != d || covariances[i].rows() != d ||
        covariances[i].cols() != d)
      throw std::invalid_argument("mixture dimension mismatch");
    centered += mode_weights[i] * means[i];
    Eigen::LLT<Eigen::MatrixXd> llt(covariances[i]);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("mixture covariance not positive definite");
  }
  if (centered.lpNorm<Eigen::Infinity>() > 1e-12)
    throw std::invalid_argument("mixture means must be centered");
}

GaussianMixtureSpec GaussianMixtureSpec::random(int d, int n_modes,
                                                std::uint64_t seed) {
  if (d < 1 || n_modes < 1) throw std::invalid_argument("bad mixture shape");
  Rng rng(derive_seed(seed, 0x6d78));
  GaussianMixtureSpec spec;
  // Dirichlet(1,...,1) via normalized exponentials.
  spec.mode_weights.resize(n_modes);
  for (int i = 0; i < n_modes; ++i)
    spec.mode_weights[i] = -std::log(1.0 - rng.uniform01());
  spec.mode_weights /= spec.mode_weights.sum();

  spec.means.resize(n_modes);
  for (int i = 0; i < n_modes; ++i) {
    spec.means[i].resize(d);
    for (int j = 0; j < d; ++j) spec.means[i][j] = rng.uniform(-1.0, 1.0);
  }
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n_modes; ++i)
    shift += spec.mode_weights[i] * spec.means[i];
  for (int i = 0; i < n_modes; ++i) spec.means[i] -= shift;

  spec.covariances.resize(n_modes);
  for (int i = 0; i < n_modes; ++i) {
    Eigen::MatrixXd y(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) y(r, c) = rng.uniform01();
    spec.covariances[i] =
        (y * y.transpose() + Eigen::MatrixXd::Identity(d, d)) / 4.0;
  }
  spec.validate();
  return spec;
}

Eigen::VectorXd GaussianMixtureSpec::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dimension());
  for (int i = 0; i < mode_count(); ++i) m += mode_weights[i] * means[i];
  return m;
}

Eigen::MatrixXd GaussianMixtureSpec::covariance() const {
  const int d = dimension();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  const Eigen::VectorXd m = mean();
  for (int i = 0; i < mode_count(); ++i) {
    const Eigen::VectorXd dm = means[i] - m;
    c += mode_weights[i] * (covariances[i] + dm * dm.transpose());
  }
  return c;
}

namespace {

template <typename Measure>
double inner_product_impl(const ScalarField& f, const ScalarField& g,
                          const Eigen::MatrixXd& pts,
                          const Eigen::VectorXd& w) {
  double acc = 0.0;
  for (int k = 0; k < pts.rows(); ++k) {
    const Eigen::VectorXd x = pts.row(k);
    const double fv = f(x);
    const double gv = g(x);
    if (!std::isfinite(fv) || !std::isfinite(gv))
      throw std::runtime_error("non-finite function value at measure node");
    acc += w[k] * fv * gv;
  }
  return acc;
}

}  // namespace

double inner_product(const ScalarField& f, const ScalarField& g,
                     const SampleSet& m) {
  return inner_product_impl<SampleSet>(f, g, m.points, m.weights);
}

double inner_product(const ScalarField& f, const ScalarField& g,
                     const QuadratureRule& m) {
  return inner_product_impl<QuadratureRule>(f, g, m.nodes, m.weights);
}

SampleSet sample_gaussian_mixture(const GaussianMixtureSpec& spec, int n,
                                  std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("need at least one sample");
  const int d = spec.dimension();
  const int nm = spec.mode_count();

  std::vector<Eigen::MatrixXd> chol(nm);
  for (int i = 0; i < nm; ++i) {
    Eigen::LLT<Eigen::MatrixXd> llt(spec.covariances[i]);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("Cholesky failed on mixture covariance");
    chol[i] = llt.matrixL();
  }
  Eigen::VectorXd cdf(nm);
  double acc = 0.0;
  for (int i = 0; i < nm; ++i) {
    acc += spec.mode_weights[i];
    cdf[i] = acc;
  }

  Rng rng(seed);
  Eigen::MatrixXd pts(n, d);
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform01();
    int mode = 0;
    while (mode < nm - 1 && u > cdf[mode]) ++mode;
    pts.row(k) =
        (spec.means[mode] + chol[mode] * rng.normal_vector(d)).transpose();
  }
  return SampleSet::from_points(std::move(pts));
}

Eigen::MatrixXd AffineMap::apply_rows(const Eigen::MatrixXd& pts) const {
  Eigen::MatrixXd out = pts * linear.transpose();
  out.rowwise() += offset.transpose();
  return out;
}

WhitenResult pca_whiten(const SampleSet& raw, double energy_fraction) {
  raw.validate();
  const int n = raw.size();
  const int d = raw.dimension();
  if (n <= d) throw std::invalid_argument("need more samples than dimensions");
  if (energy_fraction <= 0.0 || energy_fraction > 1.0)
    throw std::invalid_argument("energy fraction must lie in (0, 1]");

  const Eigen::VectorXd mean =
      (raw.weights.transpose() * raw.points).transpose();
  Eigen::MatrixXd centered = raw.points;
  centered.rowwise() -= mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * raw.weights.asDiagonal() * centered;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("covariance eigendecomposition failed");
  // Eigen returns ascending order; flip to descending.
  Eigen::VectorXd evals = eig.eigenvalues().reverse();
  Eigen::MatrixXd evecs = eig.eigenvectors().rowwise().reverse();

  const double total = evals.sum();
  if (total <= 0) throw std::runtime_error("degenerate sample covariance");
  int kept = d;
  if (energy_fraction < 1.0) {
    double run = 0.0;
    for (int i = 0; i < d; ++i) {
      run += evals[i];
      if (run / total >= energy_fraction) {
        kept = i + 1;
        break;
      }
    }
  }
  const double rank_tol = 1e-12 * evals[0];
  for (int i = 0; i < kept; ++i)
    if (evals[i] <= rank_tol)
      throw std::runtime_error("sample covariance rank-deficient at mode " +
                               std::to_string(i));

  WhitenResult res;
  res.retained_energy = evals.head(kept) / total;
  Eigen::VectorXd inv_sqrt = evals.head(kept).array().sqrt().inverse();
  res.transform.linear =
      inv_sqrt.asDiagonal() * evecs.leftCols(kept).transpose();
  res.transform.offset = -res.transform.linear * mean;
  res.whitened.points = res.transform.apply_rows(raw.points);
  res.whitened.weights = raw.weights;
  return res;
}

}  // namespace apce
