#include "delaycomp/fem_transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "delaycomp/quadrature.hpp"

namespace delaycomp {

namespace {

// Element index and local coordinate in [0, 1] of a point of [0, D].
std::pair<int, double> locate(const BasisConfig& cfg, double zeta) {
  if (!(zeta >= 0.0 && zeta <= cfg.D)) {
    throw DomainError("hat basis: zeta = " + std::to_string(zeta) + " outside [0, D]");
  }
  const int e = std::min(static_cast<int>(std::floor(zeta / cfg.h)), cfg.N - 2);
  const double xi = std::clamp((zeta - cfg.node(e)) / cfg.h, 0.0, 1.0);
  return {e, xi};
}

}  // namespace

BasisConfig BasisConfig::make(int N, double D) {
  if (N < 2) throw DomainError("basis needs N >= 2 nodes, got " + std::to_string(N));
  if (!(D > 0.0) || !std::isfinite(D)) throw DomainError("delay D must be positive and finite");
  BasisConfig cfg;
  cfg.N = N;
  cfg.D = D;
  cfg.h = D / (N - 1);
  return cfg;
}

Vector hat_basis_eval(const BasisConfig& cfg, double zeta) {
  const auto [e, xi] = locate(cfg, zeta);
  Vector phi = Vector::Zero(cfg.N);
  phi(e) = 1.0 - xi;
  phi(e + 1) = xi;
  return phi;
}

FemMatrices build_fem_matrices(const BasisConfig& cfg) {
  const int n = cfg.N;
  FemMatrices m;
  m.E = Matrix::Zero(n, n);
  m.A = Matrix::Zero(n, n);
  m.B = Vector::Zero(n);
  const double h = cfg.h;
  for (int i = 0; i < n; ++i) {
    m.E(i, i) = 4.0 * h / 6.0;
    if (i + 1 < n) {
      m.E(i, i + 1) = m.E(i + 1, i) = h / 6.0;
      m.A(i, i + 1) = 0.5;
      m.A(i + 1, i) = -0.5;
    }
  }
  m.E(0, 0) = m.E(n - 1, n - 1) = 2.0 * h / 6.0;
  m.A(0, 0) = -0.5;
  m.A(n - 1, n - 1) = -0.5;
  m.B(n - 1) = 1.0;
  return m;
}

Vector project_initial(const BasisConfig& cfg, const std::function<double(double)>& u0) {
  static const GaussRule rule = gauss_legendre(8);
  Vector load = Vector::Zero(cfg.N);
  for (int e = 0; e < cfg.elements(); ++e) {
    const double a = cfg.node(e);
    const double b = e + 1 == cfg.elements() ? cfg.D : cfg.node(e + 1);
    for (int q = 0; q < rule.size(); ++q) {
      const double half = 0.5 * (b - a);
      const double x = 0.5 * (a + b) + half * rule.nodes[q];
      const double xi = (x - a) / (b - a);
      const double w = half * rule.weights[q] * u0(x);
      load(e) += w * (1.0 - xi);
      load(e + 1) += w * xi;
    }
  }
  const FemMatrices m = build_fem_matrices(cfg);
  const Eigen::LLT<Matrix> chol(m.E);
  if (chol.info() != Eigen::Success) throw SolverError("project_initial: mass matrix not SPD");
  return chol.solve(load);
}

std::function<double(double)> sampled_profile(double D, std::span<const double> samples) {
  if (samples.size() < 2) throw DimensionError("sampled profile needs at least two samples");
  std::vector<double> values(samples.begin(), samples.end());
  const double step = D / static_cast<double>(values.size() - 1);
  return [values = std::move(values), step, D](double zeta) {
    const double z = std::clamp(zeta, 0.0, D);
    const auto last = values.size() - 2;
    const auto k = std::min(static_cast<std::size_t>(z / step), last);
    const double xi = std::clamp(z / step - static_cast<double>(k), 0.0, 1.0);
    return (1.0 - xi) * values[k] + xi * values[k + 1];
  };
}

Vector project_initial(const BasisConfig& cfg, std::span<const double> samples) {
  return project_initial(cfg, sampled_profile(cfg.D, samples));
}

double reconstruct(const BasisConfig& cfg, const Vector& ud, double zeta) {
  if (ud.size() != cfg.N) {
    throw DimensionError("reconstruct: state has " + std::to_string(ud.size()) +
                         " entries, basis has " + std::to_string(cfg.N));
  }
  const auto [e, xi] = locate(cfg, zeta);
  return (1.0 - xi) * ud(e) + xi * ud(e + 1);
}

}  // namespace delaycomp
