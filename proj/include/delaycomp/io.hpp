#pragma once

// Run specifications and the JSON documents written by the command-line tool.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "delaycomp/controller.hpp"
#include "delaycomp/lmi.hpp"
#include "delaycomp/simulate.hpp"

namespace delaycomp {

struct GainDesign {
  enum class Mode { Explicit, Poles, Lqr };
  Mode mode = Mode::Explicit;
  RowVector K;                              // Explicit
  std::vector<std::complex<double>> poles;  // Poles
  Matrix Q;                                 // Lqr
  double R = 1.0;                           // Lqr
};

struct TableRow {
  int N = 2;
  int l = 1;
};

/// Reference values a reproduction run is compared against.
struct ExpectedValues {
  std::optional<RowVector> K;
  std::optional<RowVector> K1;
  std::optional<RowVector> K2;
  std::optional<Matrix> Atilde;
  std::optional<Matrix> Btilde;
  std::optional<double> H;
  std::vector<std::complex<double>> closed_loop_poles;
  double tolerance = 1e-3;
  double pole_tolerance = 1e-6;
  std::vector<TableRow> table;
};

struct SimSettings {
  double dt = 0.0;  // zero selects D / 100
  double t_end = 20.0;
  ReferenceSchedule reference;
  Vector X0;        // zero when empty
  bool ideal = true;  // also run the ideal loop for comparison
};

struct RunSpec {
  std::string name;
  PlantModel plant;
  GainDesign gain;
  int N = 2;
  std::optional<int> l;  // single l; otherwise 1..l_max
  int l_max = 8;
  /// Build the controller without the Hurwitz check (destabilized fixtures).
  bool unchecked = false;
  SimSettings sim;
  std::vector<int> sweep_N;
  ExpectedValues expected;

  SimConfig sim_config() const;
};

/// SpecError on malformed documents; dimension and domain checks of the plant
/// are left to PlantModel::validate.
RunSpec parse_run_spec(const std::string& text);
RunSpec load_run_spec(const std::string& path);

RowVector design_gain(const PlantModel& plant, const GainDesign& gain);

/// Gain design followed by synth_controller, or assemble_controller when the
/// spec is marked unchecked.
DynamicController build_controller(const RunSpec& spec, int N);

std::string controller_to_json(const DynamicController& ctrl);
DynamicController controller_from_json(const std::string& text);

std::string certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);

std::string min_l_report_to_json(const MinLReport& report, int N);

}  // namespace delaycomp
