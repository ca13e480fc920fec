#pragma once

// Stability certificate for the closed loop between the delayed plant and the
// dynamic controller: Legendre projections of the transport state, assembly of
// the constant LMI blocks, and a small dense interior-point solver for the
// feasibility problem P > 0, alpha > 0, Lambda(P, alpha) < 0.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "delaycomp/controller.hpp"
#include "delaycomp/densela.hpp"

namespace delaycomp {

/// Shifted Legendre polynomial on [0, D], normalized so that L_k(D) = 1 and
/// L_k(0) = (-1)^k. DomainError outside [0, D].
double legendre_eval(int k, double zeta, double D);

/// (L_0(zeta), ..., L_{l-1}(zeta)).
Vector legendre_vector(int l, double zeta, double D);

struct LegendreBlock {
  int l = 1;
  double D = 1.0;
  Matrix M;   // dL/dzeta = (1/D) M L
  Vector LD;  // L(D)
  Vector L0;  // L(0)
  Matrix Q;   // diag(1, 3, ..., 2l - 1)
};

LegendreBlock build_legendre_block(int l, double D);

/// Blocks of the LMI for the augmented state eta = (X, ud, Omega).
struct LmiBlocks {
  int n = 0;
  int N = 0;
  int l = 0;
  double D = 1.0;
  RowVector Kbar;  // [K2, K1, 0]
  Matrix Acal;     // [[A, 0, 0], [Btilde, Atilde, 0], [0, 0, -M/D]]
  Vector B1;       // (0, 0, L(D))
  Vector B2;       // (B, 0, -L(0))
  Matrix Qbar;     // Q in the lower-right l x l block

  int size() const { return n + N + l; }
};

/// AssemblyError on dimension mismatch or l < 1.
LmiBlocks assemble_blocks(const PlantModel& plant, const DynamicController& ctrl, int l);

/// [[Psi, P B2], [B2^T P, -alpha]] with
/// Psi = Acal^T P + P Acal + alpha (1+D) Kbar^T Kbar - (alpha/D) Qbar
///       + P B1 Kbar + Kbar^T B1^T P.
Matrix lambda_operator(const LmiBlocks& blocks, const Matrix& P, double alpha);

struct CertificateMargins {
  double min_eig_P = 0.0;
  double max_eig_Lambda = 0.0;
  double alpha = 0.0;
  bool passed = false;
};

/// Independent check of a candidate (P, alpha) by symmetric eigenvalues:
/// passes iff min eig P > tol, alpha > tol and max eig Lambda < -tol.
CertificateMargins check_certificate(const LmiBlocks& blocks, const Matrix& P, double alpha,
                                     double tol);

struct SolverOptions {
  int max_iter = 200;       // Newton steps over all barrier stages
  double tol = 1e-7;        // margins at or below this are NotFound
  double check_tol = 1e-8;  // tolerance handed to check_certificate
  bool scaling = false;     // diagonal balancing of Acal before solving
  double p_bound = 1e8;     // P <= p_bound I keeps the margin problem bounded
};

struct Certificate {
  int n = 0;
  int N = 0;
  int l = 0;
  double D = 1.0;
  Matrix P;
  double alpha = 1.0;
  CertificateMargins margins;
  double solver_margin = 0.0;
  int iterations = 0;
};

/// No certificate within the iteration budget. This is not a proof that the
/// LMI is infeasible.
struct NotFound {
  double best_margin = 0.0;
  int iterations = 0;
  std::string reason;
};

using FeasibilityResult = std::variant<Certificate, NotFound>;

/// Maximizes t subject to P >= t I, Lambda(P, 1) <= -t I and P <= p_bound I
/// with a primal log-barrier path-following method. The LMI is homogeneous in
/// (P, alpha), so alpha is normalized to one. A Certificate is returned only
/// after check_certificate passes; SolverError on numerical breakdown.
FeasibilityResult solve_feasibility(const LmiBlocks& blocks, const SolverOptions& opts = {});

/// Diagonal s such that diag(s) Acal diag(s)^{-1} is balanced (powers of two).
Vector balancing_scaling(const Matrix& a);

/// Blocks in coordinates eta~ = diag(s) eta; Lambda transforms by congruence.
LmiBlocks scale_blocks(const LmiBlocks& blocks, const Vector& s);

struct LSweepEntry {
  enum class Status { Certified, NotFound, Error };
  int l = 0;
  Status status = Status::NotFound;
  std::optional<Certificate> certificate;
  double margin = 0.0;
  std::string message;
};

struct MinLReport {
  std::vector<LSweepEntry> entries;  // ordered by l
  std::optional<int> min_feasible_l;
};

/// Runs solve_feasibility for l = 1..l_max. Independent problems run on up to
/// `threads` workers; the report is ordered by l either way.
MinLReport find_min_l(const PlantModel& plant, const DynamicController& ctrl, int l_max,
                      const SolverOptions& opts = {}, int threads = 1);

}  // namespace delaycomp
