#include "apce/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "apce/diagnostics.hpp"
#include "apce/rng.hpp"

namespace apce {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using Section = std::map<std::string, std::string>;
using SectionMap = std::map<std::string, Section>;

SectionMap parse_sections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  SectionMap sections;
  std::string line, current;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || current.empty())
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value inside a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (sections[current].count(key))
      throw std::invalid_argument(path + ": duplicate key " + key);
    sections[current][key] = value;
  }
  return sections;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const auto b = item.find_last_not_of(" \t");
    out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(const SectionMap& map, const std::string& name,
                const std::string& path)
      : path_(path), name_(name) {
    auto it = map.find(name);
    if (it != map.end()) section_ = it->second;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return section_.count(key) > 0;
  }
  std::string get(const std::string& key) {
    seen_.insert(key);
    auto it = section_.find(key);
    if (it == section_.end())
      throw std::invalid_argument(path_ + ": missing [" + name_ + "] " + key);
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    auto it = section_.find(key);
    return it == section_.end() ? fallback : it->second;
  }
  void finish() const {
    for (const auto& [key, value] : section_) {
      (void)value;
      if (!seen_.count(key))
        throw std::invalid_argument(path_ + ": unknown key [" + name_ + "] " +
                                    key);
    }
  }

 private:
  std::string path_, name_;
  Section section_;
  std::set<std::string> seen_;
};

bool parse_bool(const std::string& v, const std::string& what) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("bad boolean for " + what + ": " + v);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& path) {
  const SectionMap sections = parse_sections(path);
  const std::set<std::string> known = {"experiment", "input",  "target",
                                       "basis",      "rotation", "solver",
                                       "ladder",     "diagnostics"};
  for (const auto& [name, body] : sections) {
    (void)body;
    if (!known.count(name))
      throw std::invalid_argument(path + ": unknown section [" + name + "]");
  }

  ExperimentConfig cfg;
  {
    SectionReader r(sections, "experiment", path);
    cfg.name = r.get("name");
    cfg.d = std::stoi(r.get("d"));
    cfg.p = std::stoi(r.get("p"));
    cfg.trials = std::stoi(r.get_or("trials", "20"));
    cfg.seed = std::stoull(r.get_or("seed", "0"));
    cfg.output_dir = r.get("output_dir");
    r.finish();
  }
  {
    SectionReader r(sections, "input", path);
    cfg.input_kind = r.get("kind");
    if (cfg.input_kind == "gaussian_mixture") {
      cfg.input_samples = std::stoi(r.get("samples"));
      cfg.gm_modes = std::stoi(r.get_or("modes", "3"));
      cfg.whiten = parse_bool(r.get_or("whiten", "off"), "input.whiten");
    } else if (cfg.input_kind == "density") {
      cfg.input_samples = std::stoi(r.get("samples"));
      const auto fams = split_list(r.get("family"));
      if (fams.size() == 1) {
        cfg.density.assign(cfg.d, density_kind_from_string(fams[0]));
      } else {
        for (const auto& f : fams)
          cfg.density.push_back(density_kind_from_string(f));
      }
    } else if (cfg.input_kind == "csv") {
      cfg.csv_path = r.get("path");
    } else {
      throw std::invalid_argument(path + ": unknown input kind " +
                                  cfg.input_kind);
    }
    r.finish();
  }
  {
    SectionReader r(sections, "target", path);
    cfg.target_name = r.get("name");
    for (const std::string key :
         {"terms", "coeff", "corr_length", "amplitude", "mean", "x_star",
          "quad_n", "index"}) {
      if (r.has(key)) cfg.target_params[key] = r.get(key);
    }
    r.finish();
  }
  {
    SectionReader r(sections, "basis", path);
    cfg.basis_types = split_list(r.get("types"));
    const std::string mode = r.get_or("near_mode", "pairwise");
    if (mode == "pairwise")
      cfg.near_mode = NearOrthMode::pairwise;
    else if (mode == "grouped")
      cfg.near_mode = NearOrthMode::grouped;
    else
      throw std::invalid_argument(path + ": unknown near_mode " + mode);
    r.finish();
  }
  {
    SectionReader r(sections, "rotation", path);
    cfg.rotate = parse_bool(r.get_or("rotate", "off"), "rotation.rotate");
    cfg.rotation_iterations = std::stoi(r.get_or("iterations", "1"));
    cfg.rebuild = parse_bool(r.get_or("rebuild", "on"), "rotation.rebuild");
    r.finish();
  }
  {
    SectionReader r(sections, "solver", path);
    cfg.sigma = std::stod(r.get_or("sigma", "0"));
    cfg.tolerance = std::stod(r.get_or("tolerance", "1e-8"));
    cfg.max_iterations = std::stoi(r.get_or("max_iterations", "100000"));
    r.finish();
  }
  {
    SectionReader r(sections, "ladder", path);
    for (const auto& m : split_list(r.get("M")))
      cfg.m_ladder.push_back(std::stoi(m));
    r.finish();
  }
  {
    SectionReader r(sections, "diagnostics", path);
    cfg.diag_gram =
        parse_bool(r.get_or("gram_deviation", "off"), "diagnostics.gram");
    if (r.has("basis_bound_m_sigma"))
      for (const auto& v : split_list(r.get("basis_bound_m_sigma")))
        cfg.diag_basis_bound.push_back(std::stod(v));
    r.finish();
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("experiment name missing");
  if (d < 1 || p < 0) throw std::invalid_argument("bad dimension or degree");
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  if (output_dir.empty()) throw std::invalid_argument("output_dir missing");
  if (m_ladder.empty()) throw std::invalid_argument("empty M ladder");
  for (int m : m_ladder)
    if (m < 1) throw std::invalid_argument("ladder entries must be >= 1");
  if (basis_types.empty()) throw std::invalid_argument("no basis arms");
  for (const auto& b : basis_types) {
    if (b != "exact" && b != "near" && b != "legendre" && b != "hermite" &&
        b != "chebyshev" && b != "laguerre")
      throw std::invalid_argument("unknown basis arm " + b);
  }
  if (input_kind == "density" &&
      static_cast<int>(density.size()) != d)
    throw std::invalid_argument("density family list must have d entries");
  if (sigma < 0) throw std::invalid_argument("negative solver sigma");
  if (rotation_iterations < 1)
    throw std::invalid_argument("rotation iterations must be >= 1");
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "name=" << name << ";d=" << d << ";p=" << p << ";trials=" << trials
      << ";seed=" << seed << ";input=" << input_kind << ";samples="
      << input_samples << ";modes=" << gm_modes << ";whiten=" << whiten
      << ";csv=" << csv_path << ";density=";
  for (auto k : density) out << to_string(k) << ',';
  out << ";target=" << target_name << ';';
  for (const auto& [k, v] : target_params) out << k << '=' << v << ',';
  out << ";basis=";
  for (const auto& b : basis_types) out << b << ',';
  out << ";near_mode=" << (near_mode == NearOrthMode::pairwise ? "pairwise"
                                                               : "grouped");
  out << ";rotate=" << rotate << ";iters=" << rotation_iterations
      << ";rebuild=" << rebuild << ";sigma=" << format_double(sigma)
      << ";tol=" << format_double(tolerance) << ";maxit=" << max_iterations
      << ";M=";
  for (int m : m_ladder) out << m << ',';
  out << ";diag_gram=" << diag_gram << ";diag_bb=";
  for (double v : diag_basis_bound) out << format_double(v) << ',';
  return out.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
  // FNV-1a over the canonical text.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["config_hash"] = config_hash;
  j["status"] = "ok";
  j["curves"] = nlohmann::json::array();
  for (const auto& c : curves) {
    nlohmann::json jc;
    jc["basis"] = c.basis;
    jc["rotated"] = c.rotated;
    jc["M"] = c.m_values;
    jc["errors"] = c.errors;
    jc["mean"] = c.mean;
    jc["median"] = c.median;
    jc["q25"] = c.q25;
    jc["q75"] = c.q75;
    j["curves"].push_back(jc);
  }
  if (!diagnostics.is_null()) j["diagnostics"] = diagnostics;
  return j;
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

SampleSet generate_inputs(const ExperimentConfig& cfg) {
  if (cfg.input_kind == "gaussian_mixture") {
    const GaussianMixtureSpec spec = GaussianMixtureSpec::random(
        cfg.d, cfg.gm_modes, derive_seed(cfg.seed, 1));
    if (cfg.whiten)
      return dependent_input_sampler(spec, cfg.input_samples,
                                     derive_seed(cfg.seed, 2));
    return sample_gaussian_mixture(spec, cfg.input_samples,
                                   derive_seed(cfg.seed, 2));
  }
  if (cfg.input_kind == "density") {
    Rng rng(derive_seed(cfg.seed, 2));
    Eigen::MatrixXd pts(cfg.input_samples, cfg.d);
    for (int i = 0; i < cfg.input_samples; ++i) {
      for (int j = 0; j < cfg.d; ++j) {
        switch (cfg.density[j]) {
          case DensityKind::gaussian: pts(i, j) = rng.normal(); break;
          case DensityKind::uniform: pts(i, j) = rng.uniform(-1.0, 1.0); break;
          case DensityKind::arcsine:
            pts(i, j) = std::cos(M_PI * rng.uniform01());
            break;
          case DensityKind::exponential:
            pts(i, j) = -std::log(1.0 - rng.uniform01());
            break;
        }
      }
    }
    return SampleSet::from_points(std::move(pts));
  }
  if (cfg.input_kind == "csv") {
    SampleSet s = SampleSet::read_csv(cfg.csv_path);
    if (s.dimension() != cfg.d)
      throw std::invalid_argument("csv dimension does not match config");
    return s;
  }
  throw std::invalid_argument("unknown input kind " + cfg.input_kind);
}

struct Arm {
  std::string label;
  BasisType type = BasisType::exact;
  DensityKind family = DensityKind::uniform;
};

Arm make_arm(const std::string& label) {
  Arm arm;
  arm.label = label;
  if (label == "exact") {
    arm.type = BasisType::exact;
  } else if (label == "near") {
    arm.type = BasisType::near;
  } else {
    arm.type = BasisType::classical;
    if (label == "legendre") arm.family = DensityKind::uniform;
    else if (label == "hermite") arm.family = DensityKind::gaussian;
    else if (label == "chebyshev") arm.family = DensityKind::arcsine;
    else if (label == "laguerre") arm.family = DensityKind::exponential;
  }
  return arm;
}

struct ArmBasis {
  PolynomialBasis basis;
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;
};

// Sampled per-dimension affine chain for classical arms: [-1,1] box for the
// bounded families, standardization for the Gaussian one, untouched inputs
// for the half-line family.
void classical_scaling_rows(DensityKind family, const Eigen::MatrixXd& pts,
                            Eigen::VectorXd& shift, Eigen::VectorXd& scale) {
  const int d = static_cast<int>(pts.cols());
  shift = Eigen::VectorXd::Zero(d);
  scale = Eigen::VectorXd::Ones(d);
  if (family == DensityKind::gaussian) {
    for (int j = 0; j < d; ++j) {
      const double mean = pts.col(j).mean();
      const double var = (pts.col(j).array() - mean).square().mean();
      shift[j] = mean;
      scale[j] = std::max(std::sqrt(var), 1e-12);
    }
  } else if (family == DensityKind::uniform ||
             family == DensityKind::arcsine) {
    for (int j = 0; j < d; ++j) {
      const double lo = pts.col(j).minCoeff();
      const double hi = pts.col(j).maxCoeff();
      shift[j] = 0.5 * (hi + lo);
      scale[j] = std::max(0.5 * (hi - lo), 1e-12);
    }
  }
}

ArmBasis build_arm_basis(const Arm& arm, const Eigen::MatrixXd& sample_pts,
                         int d, int p, NearOrthMode near_mode, bool rescale) {
  ArmBasis out;
  out.shift = Eigen::VectorXd::Zero(d);
  out.scale = Eigen::VectorXd::Ones(d);
  switch (arm.type) {
    case BasisType::exact:
      out.basis = gram_schmidt_discrete(SampleSet::from_points(sample_pts), d, p);
      break;
    case BasisType::near:
      out.basis =
          near_orthonormal(SampleSet::from_points(sample_pts), d, p, near_mode);
      break;
    case BasisType::classical:
      out.basis = classical_basis(arm.family, d, p);
      if (rescale)
        classical_scaling_rows(arm.family, sample_pts, out.shift, out.scale);
      break;
  }
  return out;
}

Surrogate fit_arm(const ArmBasis& ab, const Eigen::MatrixXd& rotation,
                  const Eigen::MatrixXd& train_pts,
                  const Eigen::VectorXd& train_vals,
                  const ExperimentConfig& cfg) {
  Surrogate s;
  s.basis = ab.basis;
  s.rotation = rotation;
  s.input_shift = ab.shift;
  s.input_scale = ab.scale;
  const Eigen::MatrixXd A =
      assemble_measurement_matrix(ab.basis, [&] {
        Eigen::MatrixXd u = train_pts * rotation;
        u.rowwise() -= ab.shift.transpose();
        u.array().rowwise() /= ab.scale.transpose().array();
        return u;
      }());
  RecoverySetup setup;
  setup.A = A;
  setup.b = train_vals;
  setup.sigma = cfg.sigma;
  SolverOptions opts;
  opts.tolerance = cfg.tolerance;
  opts.max_iterations = cfg.max_iterations;
  const RecoveryResult fit =
      cfg.sigma > 0 ? bpdn(setup, opts) : basis_pursuit(setup, opts);
  s.coefficients = fit.c;
  s.fit.training_count = static_cast<int>(train_pts.rows());
  s.fit.sigma = cfg.sigma;
  s.fit.iterations = fit.iterations;
  s.fit.converged = fit.converged;
  s.fit.residual_l2 = fit.residual_l2;
  return s;
}

void write_curves_csv(const std::string& path,
                      const std::vector<ArmCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "basis,rotated,M,mean,median,q25,q75\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.m_values.size(); ++i) {
      out << c.basis << ',' << (c.rotated ? 1 : 0) << ',' << c.m_values[i]
          << ',' << format_double(c.mean[i]) << ','
          << format_double(c.median[i]) << ',' << format_double(c.q25[i])
          << ',' << format_double(c.q75[i]) << '\n';
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  ExperimentReport report;
  report.name = cfg.name;
  report.config_hash = cfg.config_hash();
  report.curves_path = (fs::path(cfg.output_dir) / "error_curves.csv").string();
  report.report_path = (fs::path(cfg.output_dir) / "report.json").string();

  try {
    const SampleSet S = generate_inputs(cfg);
    const bool density_input = cfg.input_kind == "density";
    // Explicit densities carry their own quadrature; used for the gradient
    // matrix and for rebuilding bases after rotation.
    QuadratureRule density_rule;
    if (density_input && cfg.rotate) {
      const double tensor_nodes =
          std::pow(static_cast<double>(cfg.p + 1), cfg.d);
      if (tensor_nodes <= 200000.0) {
        std::vector<QuadratureRule> rules;
        for (DensityKind kind : cfg.density)
          rules.push_back(gauss_rule_1d(kind, cfg.p + 1));
        density_rule = tensor_rule(rules);
      } else {
        for (DensityKind kind : cfg.density)
          if (kind != cfg.density.front())
            throw std::invalid_argument(
                "mixed-family density too large for a tensor rule");
        density_rule = smolyak_rule(cfg.density.front(), cfg.d, cfg.p);
      }
    }
    const auto [s1, s2] = S.halves();
    const int pool = s2.size();
    const int max_m = *std::max_element(cfg.m_ladder.begin(),
                                        cfg.m_ladder.end());
    if (max_m >= pool)
      throw std::invalid_argument(
          "ladder exceeds the held-out pool: M must stay below " +
          std::to_string(pool));

    // Target values over the training/testing pool.
    const bool basis_target = cfg.target_name == "basis_function";
    Eigen::VectorXd pool_values;
    if (!basis_target) {
      const TargetFunction target =
          make_target(cfg.target_name, cfg.target_params, cfg.d, cfg.p,
                      derive_seed(cfg.seed, 3));
      pool_values.resize(pool);
      for (int i = 0; i < pool; ++i)
        pool_values[i] = target.fn(s2.points.row(i));
    }

    // Per-trial permutations of the pool, shared across arms and M.
    std::vector<std::vector<int>> perms(cfg.trials);
    for (int t = 0; t < cfg.trials; ++t) {
      perms[t].resize(pool);
      for (int i = 0; i < pool; ++i) perms[t][i] = i;
      Rng rng(derive_seed(cfg.seed, 1000 + t));
      for (int i = pool - 1; i > 0; --i) {
        const int j = rng.uniform_int(i + 1);
        std::swap(perms[t][i], perms[t][j]);
      }
    }

    nlohmann::json diag;
    for (const auto& label : cfg.basis_types) {
      const Arm arm = make_arm(label);
      const ArmBasis base = build_arm_basis(arm, s1.points, cfg.d, cfg.p,
                                            cfg.near_mode, !density_input);

      Eigen::VectorXd arm_values = pool_values;
      if (basis_target) {
        int index = 1;
        if (auto it = cfg.target_params.find("index");
            it != cfg.target_params.end())
          index = std::stoi(it->second);
        if (index < 0 || index >= base.basis.size())
          throw std::invalid_argument("basis_function index out of range");
        Eigen::MatrixXd u = s2.points;
        u.rowwise() -= base.shift.transpose();
        u.array().rowwise() /= base.scale.transpose().array();
        arm_values = base.basis.evaluate_rows(u).col(index);
      }

      if (cfg.diag_gram || !cfg.diag_basis_bound.empty()) {
        nlohmann::json jd;
        if (cfg.diag_gram) {
          Eigen::MatrixXd u = s2.points;
          u.rowwise() -= base.shift.transpose();
          u.array().rowwise() /= base.scale.transpose().array();
          jd["gram_deviation"] = gram_deviation(base.basis, u);
        }
        for (double ms : cfg.diag_basis_bound)
          jd["basis_bound"][format_double(ms)] =
              basis_bound(base.basis, s2, ms);
        diag[label] = jd;
      }

      // Cached pieces for the rotation step (trial-independent).
      BasisGradient base_grad;
      Eigen::MatrixXd base_gram;
      if (cfg.rotate) {
        base_grad = basis_gradient(base.basis);
        Eigen::MatrixXd u = s1.points;
        u.rowwise() -= base.shift.transpose();
        u.array().rowwise() /= base.scale.transpose().array();
        base_gram = monomial_gram(base.basis.indices, u, s1.weights);
      }

      ArmCurve plain;
      plain.basis = label;
      plain.rotated = false;
      ArmCurve rotated;
      rotated.basis = label;
      rotated.rotated = true;

      for (int m : cfg.m_ladder) {
        std::vector<double> errs_plain, errs_rot;
        for (int t = 0; t < cfg.trials; ++t) {
          const auto& perm = perms[t];
          Eigen::MatrixXd train_pts(m, cfg.d);
          Eigen::VectorXd train_vals(m);
          for (int i = 0; i < m; ++i) {
            train_pts.row(i) = s2.points.row(perm[i]);
            train_vals[i] = arm_values[perm[i]];
          }
          const int test_count = pool - m;
          Eigen::MatrixXd test_pts(test_count, cfg.d);
          Eigen::VectorXd test_vals(test_count);
          for (int i = 0; i < test_count; ++i) {
            test_pts.row(i) = s2.points.row(perm[m + i]);
            test_vals[i] = arm_values[perm[m + i]];
          }
          const Eigen::VectorXd test_w =
              Eigen::VectorXd::Constant(test_count, 1.0 / test_count);

          const Eigen::MatrixXd identity =
              Eigen::MatrixXd::Identity(cfg.d, cfg.d);
          Surrogate fit0 = fit_arm(base, identity, train_pts, train_vals, cfg);
          errs_plain.push_back(relative_l2_error(
              test_vals, fit0.evaluate_rows(test_pts), test_w));

          if (cfg.rotate) {
            Surrogate current = fit0;
            ArmBasis ab = base;
            for (int it = 0; it < cfg.rotation_iterations; ++it) {
              Eigen::MatrixXd G;
              if (density_input) {
                G = gradient_matrix(current, density_rule);
              } else if (it == 0) {
                G = gradient_matrix_cached(current, base_grad, base_gram);
              } else {
                G = gradient_matrix(current, s1);
              }
              const Eigen::MatrixXd Q = rotation_from_gradient(G);
              if (density_input && arm.type == BasisType::classical &&
                  cfg.rebuild) {
                // Orthonormal rebuild for the rotated variable by quadrature.
                ab.basis = gram_schmidt_quadrature(density_rule, Q.transpose(),
                                                   cfg.d, cfg.p);
                ab.shift = Eigen::VectorXd::Zero(cfg.d);
                ab.scale = Eigen::VectorXd::Ones(cfg.d);
              } else {
                ab = build_arm_basis(arm, s1.points * Q, cfg.d, cfg.p,
                                     cfg.near_mode, !density_input);
              }
              current = fit_arm(ab, Q, train_pts, train_vals, cfg);
            }
            errs_rot.push_back(relative_l2_error(
                test_vals, current.evaluate_rows(test_pts), test_w));
          }
        }
        plain.m_values.push_back(m);
        plain.errors.push_back(errs_plain);
        plain.mean.push_back(
            std::accumulate(errs_plain.begin(), errs_plain.end(), 0.0) /
            errs_plain.size());
        plain.median.push_back(quantile(errs_plain, 0.5));
        plain.q25.push_back(quantile(errs_plain, 0.25));
        plain.q75.push_back(quantile(errs_plain, 0.75));
        if (cfg.rotate) {
          rotated.m_values.push_back(m);
          rotated.errors.push_back(errs_rot);
          rotated.mean.push_back(
              std::accumulate(errs_rot.begin(), errs_rot.end(), 0.0) /
              errs_rot.size());
          rotated.median.push_back(quantile(errs_rot, 0.5));
          rotated.q25.push_back(quantile(errs_rot, 0.25));
          rotated.q75.push_back(quantile(errs_rot, 0.75));
        }
      }
      report.curves.push_back(std::move(plain));
      if (cfg.rotate) report.curves.push_back(std::move(rotated));
    }
    report.diagnostics = diag;

    write_curves_csv(report.curves_path, report.curves);
    std::ofstream out(report.report_path);
    out << report.to_json().dump(2) << "\n";
  } catch (const std::exception& e) {
    nlohmann::json j;
    j["name"] = cfg.name;
    j["config_hash"] = cfg.config_hash();
    j["status"] = "failed";
    j["error"] = e.what();
    std::ofstream out(report.report_path);
    out << j.dump(2) << "\n";
    throw;
  }
  return report;
}

}  // namespace apce
