#pragma once

// Finite-dimensional implementation of the predictor feedback
//   U(t) = int_0^D K e^{A(D - zeta)} B u(zeta, t) dzeta + K e^{AD} X(t)
// obtained by replacing the transport state with its Galerkin approximation.

#include <optional>
#include <vector>

#include "delaycomp/densela.hpp"
#include "delaycomp/fem_transport.hpp"
#include "delaycomp/history.hpp"

namespace delaycomp {

/// X' = A X + B U(t - D), y = C X. Single input.
struct PlantModel {
  Matrix A;
  Vector B;
  RowVector C;
  double D = 1.0;

  int states() const { return static_cast<int>(A.rows()); }

  /// Dimension and finiteness checks, D > 0, and controllability of (A, B).
  void validate() const;
};

/// ud' = Atilde ud + Btilde X + reference_input H r,  U = K1 ud + K2 X + H r.
struct DynamicController {
  BasisConfig cfg;
  FemMatrices fem;
  RowVector K;   // nominal state feedback
  RowVector K1;  // acts on the transport approximation
  RowVector K2;  // K e^{AD}
  Matrix Atilde;
  Matrix Btilde;
  Vector reference_input;  // E^{-1} B_d
  std::optional<double> H;  // absent when C (A+BK)^{-1} B = 0

  int order() const { return cfg.N; }

  double control(const Vector& x, const Vector& ud, double r) const {
    return K1.dot(ud) + K2.dot(x) + H.value_or(0.0) * r;
  }
};

/// K1 = int_0^D K e^{A(D - zeta)} B phi(zeta)^T dzeta, evaluated exactly
/// element by element from the moment integrals of e^{As}.
RowVector predictor_kernel_gain(const PlantModel& plant, const RowVector& K,
                                const BasisConfig& cfg);

/// Builds the controller matrices without checking the design premise.
DynamicController assemble_controller(const PlantModel& plant, const RowVector& K, int N);

/// Checked synthesis: N >= 2 (DomainError) and A + BK Hurwitz with spectral
/// abscissa below -1e-9 (DesignError).
DynamicController synth_controller(const PlantModel& plant, const RowVector& K, int N);

/// H = -(C (A+BK)^{-1} B)^{-1}; FeedforwardError when the DC gain vanishes.
double feedforward_gain(const PlantModel& plant, const RowVector& K);

/// Kernel K e^{A(D - zeta)} B tabulated at the quadrature points of an input
/// history layout, for repeated evaluation of the exact predictor integral.
class PredictorKernel {
 public:
  PredictorKernel(const PlantModel& plant, const RowVector& K, const InputHistory& layout);

  /// int_0^D K e^{A(D - zeta)} B u(zeta, now) dzeta.
  double integral(const InputHistory& history) const;
  /// Coefficient of the newest sample U(now) in integral().
  double newest_sample_weight(const InputHistory& history) const;
  const RowVector& state_gain() const { return state_gain_; }

 private:
  std::vector<double> table_;
  RowVector state_gain_;  // K e^{AD}
};

/// Ideal (infinite-dimensional) control value at time t from the exact
/// transport state stored in `history`. HistoryError unless t is the time of
/// the newest sample.
double exact_predictor_input(const PlantModel& plant, const RowVector& K, const Vector& X,
                             const InputHistory& history, double t);

}  // namespace delaycomp
