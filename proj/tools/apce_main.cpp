#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "apce/diagnostics.hpp"
#include "apce/experiment.hpp"
#include "apce/rotation.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCompute = 3;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_run(const std::string& config_path) {
  apce::ExperimentConfig cfg;
  try {
    cfg = apce::ExperimentConfig::parse(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const apce::ExperimentReport report = apce::run_experiment(cfg);
    std::cout << "wrote " << report.curves_path << "\n";
    std::cout << "wrote " << report.report_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return kExitCompute;
  }
  return 0;
}

int cmd_build_basis(const std::string& input, int p, const std::string& type,
                    const std::string& output) {
  try {
    const apce::SampleSet S = apce::SampleSet::read_csv(input);
    apce::PolynomialBasis basis;
    if (type == "exact")
      basis = apce::gram_schmidt_discrete(S, S.dimension(), p);
    else if (type == "near")
      basis = apce::near_orthonormal(S, S.dimension(), p);
    else {
      std::cerr << "config error: basis type must be exact or near\n";
      return kExitConfig;
    }
    basis.write(output);
    std::cout << "wrote " << output << " (" << basis.size()
              << " basis functions)\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return kExitCompute;
  }
  return 0;
}

int cmd_diagnose(const std::string& basis_path, const std::string& points_path,
                 bool gram, std::vector<double> m_sigma,
                 std::vector<int> support, std::int64_t budget,
                 const std::string& output) {
  try {
    const apce::PolynomialBasis basis = apce::PolynomialBasis::read(basis_path);
    const apce::SampleSet pts = apce::SampleSet::read_csv(points_path);
    nlohmann::json j;
    if (gram) j["gram_deviation"] = apce::gram_deviation(basis, pts.points);
    for (double ms : m_sigma)
      j["basis_bound"][format_double(ms)] = apce::basis_bound(basis, pts, ms);
    if (!support.empty()) {
      apce::SupportSpec T;
      T.indices = support;
      std::sort(T.indices.begin(), T.indices.end());
      const Eigen::MatrixXd A =
          apce::assemble_measurement_matrix(basis, pts.points) /
          std::sqrt(static_cast<double>(pts.size()));
      j["ric"] = apce::ric_constants(A, T, budget).to_json();
    }
    if (output.empty()) {
      std::cout << j.dump(2) << "\n";
    } else {
      std::ofstream out(output);
      out << j.dump(2) << "\n";
      std::cout << "wrote " << output << "\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return kExitCompute;
  }
  return 0;
}

int cmd_predict(const std::string& surrogate_path,
                const std::string& points_path, const std::string& output) {
  try {
    const apce::Surrogate s = apce::Surrogate::read(surrogate_path);
    const apce::SampleSet pts = apce::SampleSet::read_csv(points_path);
    const Eigen::VectorXd values = s.evaluate_rows(pts.points);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!output.empty()) {
      file.open(output);
      out = &file;
    }
    (*out) << "f\n";
    for (int i = 0; i < values.size(); ++i)
      (*out) << format_double(values[i]) << "\n";
    if (!output.empty()) std::cout << "wrote " << output << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return kExitCompute;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven polynomial chaos toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment config file")
      ->required();

  std::string bb_input, bb_output = "basis.txt", bb_type = "exact";
  int bb_p = 2;
  auto* build = app.add_subcommand("build-basis",
                                   "Construct a data-driven basis from CSV "
                                   "samples");
  build->add_option("--input", bb_input, "Sample CSV (dim=<d> header)")
      ->required();
  build->add_option("--p", bb_p, "Maximum total degree");
  build->add_option("--type", bb_type, "exact | near");
  build->add_option("--output", bb_output, "Basis file to write");

  std::string dg_basis, dg_points, dg_output;
  bool dg_gram = false;
  std::vector<double> dg_msigma;
  std::vector<int> dg_support;
  std::int64_t dg_budget = 1000000;
  auto* diag = app.add_subcommand("diagnose", "Matrix-quality diagnostics");
  diag->add_option("--basis", dg_basis, "Basis file")->required();
  diag->add_option("--points", dg_points, "Sample CSV")->required();
  diag->add_flag("--gram", dg_gram, "Report the Gram deviation");
  diag->add_option("--basis-bound", dg_msigma,
                   "Basis bound at these m_sigma values");
  diag->add_option("--support", dg_support,
                   "Support columns for restricted isometry constants");
  diag->add_option("--budget", dg_budget, "Exhaustive enumeration budget");
  diag->add_option("--output", dg_output, "Write JSON here instead of stdout");

  std::string pr_surrogate, pr_points, pr_output;
  auto* predict = app.add_subcommand("predict",
                                     "Evaluate a surrogate on CSV points");
  predict->add_option("surrogate", pr_surrogate, "Surrogate file")->required();
  predict->add_option("points", pr_points, "Points CSV")->required();
  predict->add_option("--output", pr_output, "Write values here");

  auto* list = app.add_subcommand("list-targets",
                                  "List registered target functions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (run->parsed()) return cmd_run(config_path);
  if (build->parsed()) return cmd_build_basis(bb_input, bb_p, bb_type, bb_output);
  if (diag->parsed())
    return cmd_diagnose(dg_basis, dg_points, dg_gram, dg_msigma, dg_support,
                        dg_budget, dg_output);
  if (predict->parsed()) return cmd_predict(pr_surrogate, pr_points, pr_output);
  if (list->parsed()) {
    for (const auto& [name, desc] : apce::registered_targets())
      std::cout << name << "  -  " << desc << "\n";
    return 0;
  }
  return kExitConfig;
}
