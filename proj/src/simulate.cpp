#include "delaycomp/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/LU>

namespace delaycomp {

double ReferenceSchedule::at(double t) const {
  double value = 0.0;
  for (const auto& [time, v] : steps) {
    if (time <= t) value = v;
    else break;
  }
  return value;
}

bool ReferenceSchedule::is_zero() const {
  for (const auto& s : steps) {
    if (s.second != 0.0) return false;
  }
  return true;
}

double SimConfig::grid_step(double dt, double D) {
  if (!(dt > 0.0) || !(D > 0.0)) throw DomainError("time step and delay must be positive");
  const double steps = std::max(10.0, std::ceil(D / dt - 1e-9));
  return D / steps;
}

namespace {

struct Grid {
  double dt;
  long samples;  // including t = 0
};

Grid make_grid(const SimConfig& cfg, double D) {
  if (!(cfg.t_end > 0.0)) throw DomainError("simulation end time must be positive");
  if (!(cfg.divergence_threshold > 0.0)) throw DomainError("divergence threshold must be positive");
  const double dt = SimConfig::grid_step(cfg.dt, D);
  return {dt, static_cast<long>(std::floor(cfg.t_end / dt + 1e-9)) + 1};
}

std::function<double(double)> profile_or_zero(const SimConfig& cfg) {
  if (cfg.u0) return cfg.u0;
  return [](double) { return 0.0; };
}

Vector initial_state(const SimConfig& cfg, int n) {
  if (cfg.X0.size() == 0) return Vector::Zero(n);
  if (cfg.X0.size() != n) throw DimensionError("X0 must have " + std::to_string(n) + " entries");
  return cfg.X0;
}

std::optional<std::string> blow_up(const Vector& z, double threshold) {
  if (!z.allFinite()) return std::string("non-finite state");
  if (z.norm() > threshold) return std::string("state norm exceeded ") + std::to_string(threshold);
  return std::nullopt;
}

}  // namespace

Trajectory simulate_closed_loop(const PlantModel& plant, const DynamicController& ctrl,
                                const SimConfig& cfg) {
  plant.validate();
  const int n = plant.states();
  const int N = ctrl.order();
  if (ctrl.K2.size() != n || ctrl.Btilde.cols() != n) {
    throw DimensionError("controller does not match the plant dimension");
  }
  const Grid grid = make_grid(cfg, plant.D);
  const double dt = grid.dt;
  const auto profile = profile_or_zero(cfg);

  Vector z(n + N);
  z.head(n) = initial_state(cfg, n);
  if (cfg.ud0) {
    if (cfg.ud0->size() != N) throw DimensionError("ud0 must have N entries");
    z.tail(N) = *cfg.ud0;
  } else {
    z.tail(N) = project_initial(ctrl.cfg, profile);
  }

  Matrix Acl = Matrix::Zero(n + N, n + N);
  Acl.topLeftCorner(n, n) = plant.A;
  Acl.bottomLeftCorner(N, n) = ctrl.Btilde;
  Acl.bottomRightCorner(N, N) = ctrl.Atilde;
  const Matrix I = Matrix::Identity(n + N, n + N);
  const Eigen::PartialPivLU<Matrix> lhs(I - 0.5 * dt * Acl);
  const Matrix rhs = I + 0.5 * dt * Acl;
  const double H = ctrl.H.value_or(0.0);

  InputHistory history(plant.D, dt, profile, cfg.quadrature_points);
  const long d = history.steps_per_delay();

  Trajectory traj;
  traj.D = plant.D;
  traj.dt = dt;
  traj.u0 = profile;
  traj.quadrature_points = cfg.quadrature_points;
  traj.t.reserve(static_cast<std::size_t>(grid.samples));

  Vector forcing(n + N);
  for (long k = 0; k < grid.samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vector x = z.head(n);
    const Vector ud = z.tail(N);
    const double u = ctrl.control(x, ud, cfg.reference.at(t));
    history.push(u);
    traj.t.push_back(t);
    traj.X.push_back(x);
    traj.ud.push_back(ud);
    traj.U.push_back(u);
    traj.y.push_back(plant.C.dot(x));
    if (k + 1 == grid.samples) break;

    // Delayed input and reference at the step midpoint.
    const double u_delayed = history.interval_mean(k - d);
    const double r_mid = cfg.reference.at(t + 0.5 * dt);
    forcing.head(n) = plant.B * u_delayed;
    forcing.tail(N) = ctrl.reference_input * (H * r_mid);
    z = lhs.solve(rhs * z + dt * forcing);
    if (auto why = blow_up(z, cfg.divergence_threshold)) {
      traj.divergence = DivergenceReport{t + dt, *why};
      break;
    }
  }
  return traj;
}

Trajectory simulate_ideal(const PlantModel& plant, const RowVector& K, const SimConfig& cfg) {
  plant.validate();
  const int n = plant.states();
  if (K.size() != n) throw DimensionError("K must have n entries");
  const Grid grid = make_grid(cfg, plant.D);
  const double dt = grid.dt;
  const auto profile = profile_or_zero(cfg);
  const double H = cfg.reference.is_zero() ? 0.0 : feedforward_gain(plant, K);

  Vector x = initial_state(cfg, n);
  const Matrix I = Matrix::Identity(n, n);
  const Eigen::PartialPivLU<Matrix> lhs(I - 0.5 * dt * plant.A);
  const Matrix rhs = I + 0.5 * dt * plant.A;

  InputHistory history(plant.D, dt, profile, cfg.quadrature_points);
  const long d = history.steps_per_delay();
  const PredictorKernel kernel(plant, K, history);

  Trajectory traj;
  traj.D = plant.D;
  traj.dt = dt;
  traj.u0 = profile;
  traj.quadrature_points = cfg.quadrature_points;
  traj.t.reserve(static_cast<std::size_t>(grid.samples));

  for (long k = 0; k < grid.samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    // U(t) appears in its own predictor integral through the newest interval,
    // so solve the scalar fixed point U = I0 + w U + K e^{AD} X + H r.
    history.push(0.0);
    const double partial = kernel.integral(history);
    const double w = kernel.newest_sample_weight(history);
    const double u = (partial + kernel.state_gain().dot(x) + H * cfg.reference.at(t)) / (1.0 - w);
    history.set_latest(u);
    traj.t.push_back(t);
    traj.X.push_back(x);
    traj.ud.emplace_back();
    traj.U.push_back(u);
    traj.y.push_back(plant.C.dot(x));
    if (k + 1 == grid.samples) break;

    const double u_delayed = history.interval_mean(k - d);
    x = lhs.solve(rhs * x + dt * plant.B * u_delayed);
    if (auto why = blow_up(x, cfg.divergence_threshold)) {
      traj.divergence = DivergenceReport{t + dt, *why};
      break;
    }
  }
  return traj;
}

std::vector<double> lyapunov_trace(const Trajectory& traj, const Certificate& cert,
                                   const LmiBlocks& blocks, const LegendreBlock& lb) {
  if (cert.n != blocks.n || cert.N != blocks.N || cert.l != blocks.l || lb.l != blocks.l) {
    throw DimensionError("certificate, blocks and Legendre block disagree on (n, N, l)");
  }
  const int n = blocks.n;
  const int N = blocks.N;
  const int l = blocks.l;
  if (cert.P.rows() != n + N + l || cert.P.cols() != n + N + l) {
    throw DimensionError("certificate matrix has the wrong size");
  }
  if (traj.size() == 0 || traj.U.size() != traj.size() || traj.X.size() != traj.size()) {
    throw HistoryError("trajectory does not cover its own input history");
  }
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj.X[k].size() != n || traj.ud[k].size() != N) {
      throw DimensionError("trajectory states do not match the certificate");
    }
  }

  InputHistory history(traj.D, traj.dt, traj.u0, traj.quadrature_points);
  std::vector<Vector> legendre;
  std::vector<double> energy_weight;
  for (double zeta : history.quadrature_points()) {
    legendre.push_back(legendre_vector(l, std::min(zeta, traj.D), traj.D));
    energy_weight.push_back(1.0 + zeta);
  }

  std::vector<double> V;
  V.reserve(traj.size());
  Vector eta(n + N + l);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    history.push(traj.U[k]);
    Vector omega = Vector::Zero(l);
    double energy = 0.0;
    history.for_each_point([&](std::size_t idx, double, double w, double u) {
      omega += legendre[idx] * (w * u);
      energy += energy_weight[idx] * w * u * u;
    });
    eta << traj.X[k], traj.ud[k], omega;
    V.push_back(eta.dot(cert.P * eta) + cert.alpha * energy);
  }
  return V;
}

DeviationMetrics compare_metrics(const Trajectory& traj, const Trajectory& ideal) {
  if (traj.size() != ideal.size() || traj.y.size() != traj.size() || ideal.y.size() != ideal.size()) {
    throw ComparisonError("trajectories have different lengths (" + std::to_string(traj.size()) +
                          " vs " + std::to_string(ideal.size()) + ")");
  }
  if (std::abs(traj.dt - ideal.dt) > 1e-12 * traj.dt) {
    throw ComparisonError("trajectories use different time steps");
  }
  DeviationMetrics m;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (std::abs(traj.t[k] - ideal.t[k]) > 1e-9 * traj.dt) {
      throw ComparisonError("time grids differ at sample " + std::to_string(k));
    }
    const double e = traj.y[k] - ideal.y[k];
    m.sup = std::max(m.sup, std::abs(e));
    m.l2 += traj.dt * e * e;
  }
  return m;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << ',' << buf;
}

}  // namespace

void write_csv(std::ostream& os, const Trajectory& traj, const Trajectory* ideal,
               const std::vector<double>* V) {
  if (ideal && ideal->size() != traj.size()) {
    throw ComparisonError("ideal trajectory has a different length");
  }
  if (V && V->size() != traj.size()) throw DimensionError("V has a different length");
  const auto n = traj.size() ? traj.X.front().size() : 0;
  const auto N = traj.size() ? traj.ud.front().size() : 0;
  os << "t,y,y_ideal,U";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",X_" << i;
  for (Eigen::Index i = 1; i <= N; ++i) os << ",ud_" << i;
  os << ",V\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", traj.t[k]);
    os << buf;
    put(os, traj.y[k]);
    put(os, ideal ? ideal->y[k] : nan);
    put(os, traj.U[k]);
    for (Eigen::Index i = 0; i < n; ++i) put(os, traj.X[k](i));
    for (Eigen::Index i = 0; i < N; ++i) put(os, traj.ud[k](i));
    put(os, V ? (*V)[k] : nan);
    os << '\n';
  }
}

}  // namespace delaycomp
