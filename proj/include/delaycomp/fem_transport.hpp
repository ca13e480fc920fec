#pragma once

// Galerkin approximation of the transport equation u_t = u_zeta on [0, D]
// with inflow u(D, t) = U(t), on equidistant piecewise-linear hat functions.

#include <functional>
#include <span>

#include "delaycomp/densela.hpp"

namespace delaycomp {

struct BasisConfig {
  int N = 2;       // number of hat functions (nodes)
  double D = 1.0;  // length of the domain (the delay)
  double h = 1.0;  // element length D / (N - 1)

  /// Validated configuration; N < 2 or D <= 0 raise DomainError.
  static BasisConfig make(int N, double D);

  double node(int j) const { return j * h; }
  int elements() const { return N - 1; }
};

struct FemMatrices {
  Matrix E;  // mass matrix  int phi phi^T
  Matrix A;  // -int phi' phi^T - phi(0) phi(0)^T
  Vector B;  // phi(D)
};

/// phi(zeta): at most two non-zero entries, summing to one.
Vector hat_basis_eval(const BasisConfig& cfg, double zeta);

FemMatrices build_fem_matrices(const BasisConfig& cfg);

/// Galerkin projection E^{-1} int phi u0, with 8-point Gauss per element.
Vector project_initial(const BasisConfig& cfg, const std::function<double(double)>& u0);

/// Same, for u0 given as samples on an equidistant grid covering [0, D]
/// (at least two samples, linear interpolation in between).
Vector project_initial(const BasisConfig& cfg, std::span<const double> samples);

/// phi(zeta)^T ud.
double reconstruct(const BasisConfig& cfg, const Vector& ud, double zeta);

/// Linear interpolant of equidistant samples over [0, D].
std::function<double(double)> sampled_profile(double D, std::span<const double> samples);

}  // namespace delaycomp
