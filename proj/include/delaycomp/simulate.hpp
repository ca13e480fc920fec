#pragma once

// Time-domain simulation of the delayed plant under the dynamic controller and
// under the ideal predictor law, plus sampling of the Lyapunov functional.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "delaycomp/controller.hpp"
#include "delaycomp/lmi.hpp"

namespace delaycomp {

/// Piecewise-constant reference: value of the last step with time <= t, zero
/// before the first step.
struct ReferenceSchedule {
  std::vector<std::pair<double, double>> steps;  // (time, value), increasing times

  double at(double t) const;
  bool is_zero() const;
  static ReferenceSchedule step(double time, double value) { return {{{time, value}}}; }
};

struct SimConfig {
  double dt = 0.01;
  double t_end = 10.0;
  ReferenceSchedule reference;
  Vector X0;
  /// Initial transport profile u(zeta, 0) on [0, D]; zero when empty.
  std::function<double(double)> u0;
  /// Initial controller state; projection of u0 when absent.
  std::optional<Vector> ud0;
  double divergence_threshold = 1e10;
  int quadrature_points = 4;

  /// Largest dt' <= dt with D / dt' an integer of at least 10.
  static double grid_step(double dt, double D);
};

struct DivergenceReport {
  double time = 0.0;
  std::string reason;
};

struct Trajectory {
  double D = 1.0;
  double dt = 0.01;
  std::vector<double> t;
  std::vector<Vector> X;
  std::vector<Vector> ud;  // empty vectors for the ideal loop
  std::vector<double> U;
  std::vector<double> y;
  std::function<double(double)> u0;  // transport profile before t = 0
  int quadrature_points = 4;
  std::optional<DivergenceReport> divergence;

  std::size_t size() const { return t.size(); }
  bool diverged() const { return divergence.has_value(); }
};

/// Delayed plant driven by the dynamic controller, implicit midpoint rule.
Trajectory simulate_closed_loop(const PlantModel& plant, const DynamicController& ctrl,
                                const SimConfig& cfg);

/// Delayed plant under U = int K e^{A(D - zeta)} B u dzeta + K e^{AD} X + H r
/// on the exact transport state. H is only required for a nonzero reference.
Trajectory simulate_ideal(const PlantModel& plant, const RowVector& K, const SimConfig& cfg);

/// V(t) = eta^T P eta + alpha int_0^D (1 + zeta) u(zeta, t)^2 dzeta with
/// eta = (X, ud, Omega) and Omega_k = int_0^D L_k u dzeta, at every sample.
std::vector<double> lyapunov_trace(const Trajectory& traj, const Certificate& cert,
                                   const LmiBlocks& blocks, const LegendreBlock& lb);

struct DeviationMetrics {
  double sup = 0.0;
  double l2 = 0.0;  // sum dt (y - y_ideal)^2
};

/// ComparisonError unless both trajectories share the time grid.
DeviationMetrics compare_metrics(const Trajectory& traj, const Trajectory& ideal);

/// Header `t,y,y_ideal,U,X_1..X_n,ud_1..ud_N,V`; nan where a column is absent.
void write_csv(std::ostream& os, const Trajectory& traj, const Trajectory* ideal = nullptr,
               const std::vector<double>* V = nullptr);

}  // namespace delaycomp
