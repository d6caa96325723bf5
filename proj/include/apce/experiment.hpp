#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "apce/measure.hpp"
#include "apce/problems.hpp"
#include "apce/rotation.hpp"

namespace apce {

/// Validated experiment description parsed from a sectioned key = value
/// file. Unknown sections or keys are rejected.
struct ExperimentConfig {
  std::string name;
  int d = 0;
  int p = 0;
  int trials = 20;
  std::uint64_t seed = 0;
  std::string output_dir;

  std::string input_kind;  // gaussian_mixture | density | csv
  int input_samples = 0;
  int gm_modes = 3;
  bool whiten = false;
  std::vector<DensityKind> density;
  std::string csv_path;

  std::string target_name;
  TargetParams target_params;

  // Arms: exact | near | legendre | hermite | chebyshev | laguerre.
  std::vector<std::string> basis_types;
  NearOrthMode near_mode = NearOrthMode::pairwise;

  bool rotate = false;
  int rotation_iterations = 1;
  // For classical arms on explicit-density inputs: rebuild the basis for the
  // rotated variable by quadrature (on) or reapply the tensor basis (off).
  bool rebuild = true;

  double sigma = 0.0;
  double tolerance = 1e-8;
  int max_iterations = 100000;

  std::vector<int> m_ladder;

  bool diag_gram = false;
  std::vector<double> diag_basis_bound;  // m_sigma values

  static ExperimentConfig parse(const std::string& path);
  void validate() const;
  std::string canonical_text() const;
  std::uint64_t config_hash() const;
};

struct ArmCurve {
  std::string basis;
  bool rotated = false;
  std::vector<int> m_values;
  std::vector<std::vector<double>> errors;  // per M, per trial
  std::vector<double> mean, median, q25, q75;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t config_hash = 0;
  std::vector<ArmCurve> curves;
  nlohmann::json diagnostics;
  std::string curves_path;
  std::string report_path;

  nlohmann::json to_json() const;
};

/// Runs the full protocol: inputs, half split, per-arm bases, the M ladder
/// with seeded trials, held-out scoring, CSV + JSON outputs. A module error
/// writes a partial report marked failed, then rethrows.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace apce
