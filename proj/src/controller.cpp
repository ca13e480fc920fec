#include "delaycomp/controller.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace delaycomp {

void PlantModel::validate() const {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n) throw DimensionError("plant: A must be square and non-empty");
  if (B.size() != n) throw DimensionError("plant: B must have n = " + std::to_string(n) + " rows");
  if (C.size() != n) throw DimensionError("plant: C must have n = " + std::to_string(n) + " columns");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw DomainError("plant: non-finite entries");
  }
  if (!(D > 0.0) || !std::isfinite(D)) throw DomainError("plant: delay D must be positive");
  if (!is_controllable(A, B)) throw ControllabilityError("plant: (A, B) is not controllable");
}

RowVector predictor_kernel_gain(const PlantModel& plant, const RowVector& K,
                                const BasisConfig& cfg) {
  const auto moments = expm_moment_integrals(plant.A, cfg.h);
  const double h = cfg.h;
  RowVector k1 = RowVector::Zero(cfg.N);
  for (int e = 0; e < cfg.elements(); ++e) {
    // On [e h, (e+1) h] substitute s = D - zeta = s0 + tau, tau in [0, h].
    // The left hat equals tau / h there, the right hat 1 - tau / h.
    const double s0 = std::max(0.0, cfg.D - (e + 1) * h);
    const RowVector lead = K * mat_exp(plant.A, s0);
    const double first = (lead * moments.G2 * plant.B).value() / h;
    const double total = (lead * moments.G1 * plant.B).value();
    k1(e) += first;
    k1(e + 1) += total - first;
  }
  return k1;
}

DynamicController assemble_controller(const PlantModel& plant, const RowVector& K, int N) {
  if (K.size() != plant.states()) throw DimensionError("controller: K must be 1 x n");
  DynamicController c;
  c.cfg = BasisConfig::make(N, plant.D);
  c.fem = build_fem_matrices(c.cfg);
  c.K = K;
  c.K1 = predictor_kernel_gain(plant, K, c.cfg);
  c.K2 = K * mat_exp(plant.A, plant.D);
  c.Atilde = solve_linear(c.fem.E, c.fem.A + c.fem.B * c.K1);
  c.Btilde = solve_linear(c.fem.E, c.fem.B * c.K2);
  c.reference_input = solve_linear(c.fem.E, c.fem.B);
  try {
    c.H = feedforward_gain(plant, K);
  } catch (const FeedforwardError&) {
    c.H.reset();
  } catch (const SingularMatrixError&) {
    c.H.reset();
  }
  return c;
}

DynamicController synth_controller(const PlantModel& plant, const RowVector& K, int N) {
  if (N < 2) throw DomainError("controller order N must be >= 2, got " + std::to_string(N));
  if (K.size() != plant.states()) throw DimensionError("controller: K must be 1 x n");
  const double abscissa = spectral_abscissa(Matrix(plant.A + plant.B * K));
  if (!(abscissa < -1e-9)) {
    throw DesignError("A + BK is not Hurwitz (spectral abscissa " + std::to_string(abscissa) + ")");
  }
  return assemble_controller(plant, K, N);
}

double feedforward_gain(const PlantModel& plant, const RowVector& K) {
  const Matrix closed = plant.A + plant.B * K;
  const double dc = (plant.C * solve_linear(closed, plant.B)).value();
  const double scale = plant.C.norm() * plant.B.norm();
  if (!(std::abs(dc) > 1e-12 * std::max(scale, 1e-300))) {
    throw FeedforwardError("feedforward: C (A+BK)^{-1} B vanishes, reference tracking impossible");
  }
  return -1.0 / dc;
}

PredictorKernel::PredictorKernel(const PlantModel& plant, const RowVector& K,
                                 const InputHistory& layout) {
  const auto pts = layout.quadrature_points();
  table_.reserve(pts.size());
  for (double zeta : pts) table_.push_back((K * mat_exp(plant.A, plant.D - zeta) * plant.B).value());
  state_gain_ = K * mat_exp(plant.A, plant.D);
}

double PredictorKernel::integral(const InputHistory& history) const {
  return history.integrate_tabulated(table_);
}

double PredictorKernel::newest_sample_weight(const InputHistory& history) const {
  // The newest sample only enters the last grid interval, and only once that
  // interval lies right of t = 0.
  if (history.count() < 2) return 0.0;
  const auto& rule = history.rule();
  const auto per = static_cast<std::size_t>(rule.size());
  const std::size_t base = table_.size() - per;
  double w = 0.0;
  for (std::size_t q = 0; q < per; ++q) {
    const double local = 0.5 * (1.0 + rule.nodes[q]);
    w += table_[base + q] * 0.5 * history.dt() * rule.weights[q] * local;
  }
  return w;
}

double exact_predictor_input(const PlantModel& plant, const RowVector& K, const Vector& X,
                             const InputHistory& history, double t) {
  if (std::abs(t - history.now()) > 1e-9 * history.dt()) {
    throw HistoryError("exact_predictor_input: history does not end at t = " + std::to_string(t));
  }
  if (std::abs(history.delay() - plant.D) > 1e-12 * plant.D) {
    throw HistoryError("exact_predictor_input: history window length differs from the delay");
  }
  if (X.size() != plant.states()) throw DimensionError("exact_predictor_input: X must have n entries");
  const PredictorKernel kernel(plant, K, history);
  return kernel.integral(history) + kernel.state_gain().dot(X);
}

}  // namespace delaycomp
