#include "delaycomp/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

namespace delaycomp {

namespace {

double binomial(int n, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

}  // namespace

double legendre_eval(int k, double zeta, double D) {
  if (k < 0) throw DomainError("legendre_eval: negative degree");
  if (!(D > 0.0)) throw DomainError("legendre_eval: D must be positive");
  if (!(zeta >= 0.0 && zeta <= D)) {
    throw DomainError("legendre_eval: zeta = " + std::to_string(zeta) + " outside [0, D]");
  }
  // (-1)^k sum_i (-1)^i C(k,i) C(k+i,i) (zeta/D)^i, by Horner.
  const double x = zeta / D;
  double acc = 0.0;
  for (int i = k; i >= 0; --i) {
    const double p = (i % 2 == 0 ? 1.0 : -1.0) * binomial(k, i) * binomial(k + i, i);
    acc = acc * x + p;
  }
  return k % 2 == 0 ? acc : -acc;
}

Vector legendre_vector(int l, double zeta, double D) {
  Vector out(l);
  for (int k = 0; k < l; ++k) out(k) = legendre_eval(k, zeta, D);
  return out;
}

LegendreBlock build_legendre_block(int l, double D) {
  if (l < 1) throw DomainError("legendre block needs l >= 1");
  if (!(D > 0.0)) throw DomainError("legendre block: D must be positive");
  LegendreBlock lb;
  lb.l = l;
  lb.D = D;
  lb.M = Matrix::Zero(l, l);
  for (int k = 0; k < l; ++k) {
    for (int i = 0; i < k; ++i) lb.M(k, i) = (2.0 * i + 1.0) * ((k + i) % 2 == 0 ? 0.0 : 2.0);
  }
  lb.LD = Vector::Ones(l);
  lb.L0.resize(l);
  for (int k = 0; k < l; ++k) lb.L0(k) = k % 2 == 0 ? 1.0 : -1.0;
  lb.Q = Matrix::Zero(l, l);
  for (int k = 0; k < l; ++k) lb.Q(k, k) = 2.0 * k + 1.0;
  return lb;
}

LmiBlocks assemble_blocks(const PlantModel& plant, const DynamicController& ctrl, int l) {
  if (l < 1) throw AssemblyError("assemble_blocks: l must be >= 1");
  const int n = plant.states();
  const int N = ctrl.order();
  if (ctrl.K2.size() != n || ctrl.K1.size() != N || ctrl.Atilde.rows() != N ||
      ctrl.Atilde.cols() != N || ctrl.Btilde.rows() != N || ctrl.Btilde.cols() != n ||
      plant.B.size() != n) {
    throw AssemblyError("assemble_blocks: plant and controller dimensions disagree");
  }
  if (std::abs(ctrl.cfg.D - plant.D) > 1e-12 * plant.D) {
    throw AssemblyError("assemble_blocks: controller was built for a different delay");
  }
  const LegendreBlock lb = build_legendre_block(l, plant.D);
  const int m = n + N + l;

  LmiBlocks b;
  b.n = n;
  b.N = N;
  b.l = l;
  b.D = plant.D;
  b.Kbar = RowVector::Zero(m);
  b.Kbar.head(n) = ctrl.K2;
  b.Kbar.segment(n, N) = ctrl.K1;
  b.Acal = Matrix::Zero(m, m);
  b.Acal.topLeftCorner(n, n) = plant.A;
  b.Acal.block(n, 0, N, n) = ctrl.Btilde;
  b.Acal.block(n, n, N, N) = ctrl.Atilde;
  b.Acal.bottomRightCorner(l, l) = -lb.M / plant.D;
  b.B1 = Vector::Zero(m);
  b.B1.tail(l) = lb.LD;
  b.B2 = Vector::Zero(m);
  b.B2.head(n) = plant.B;
  b.B2.tail(l) = -lb.L0;
  b.Qbar = Matrix::Zero(m, m);
  b.Qbar.bottomRightCorner(l, l) = lb.Q;
  return b;
}

Matrix lambda_operator(const LmiBlocks& blocks, const Matrix& P, double alpha) {
  const int m = blocks.size();
  if (P.rows() != m || P.cols() != m) {
    throw AssemblyError("lambda_operator: P must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  const Matrix PB1K = P * blocks.B1 * blocks.Kbar;
  Matrix out(m + 1, m + 1);
  out.topLeftCorner(m, m) = blocks.Acal.transpose() * P + P * blocks.Acal +
                            alpha * (1.0 + blocks.D) * blocks.Kbar.transpose() * blocks.Kbar -
                            (alpha / blocks.D) * blocks.Qbar + PB1K + PB1K.transpose();
  const Vector PB2 = P * blocks.B2;
  out.topRightCorner(m, 1) = PB2;
  out.bottomLeftCorner(1, m) = PB2.transpose();
  out(m, m) = -alpha;
  return out;
}

CertificateMargins check_certificate(const LmiBlocks& blocks, const Matrix& P, double alpha,
                                     double tol) {
  CertificateMargins out;
  out.alpha = alpha;
  out.min_eig_P = sym_eig(P).eigenvalues.minCoeff();
  out.max_eig_Lambda = sym_eig(lambda_operator(blocks, P, alpha)).eigenvalues.maxCoeff();
  out.passed = out.min_eig_P > tol && alpha > tol && out.max_eig_Lambda < -tol;
  return out;
}

Vector balancing_scaling(const Matrix& a) {
  const auto m = a.rows();
  Vector s = Vector::Ones(m);
  Matrix work = a;
  constexpr double radix = 2.0;
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double c = work.col(i).norm() - std::abs(work(i, i)) > 0
                           ? std::sqrt(work.col(i).squaredNorm() - work(i, i) * work(i, i))
                           : 0.0;
      const double r = work.row(i).norm() - std::abs(work(i, i)) > 0
                           ? std::sqrt(work.row(i).squaredNorm() - work(i, i) * work(i, i))
                           : 0.0;
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      double cc = c;
      double rr = r;
      while (cc < rr / radix) {
        cc *= radix;
        rr /= radix;
        f *= radix;
      }
      while (cc >= rr * radix) {
        cc /= radix;
        rr *= radix;
        f /= radix;
      }
      if ((cc * cc + rr * rr) < 0.95 * (c * c + r * r)) {
        converged = false;
        // Row i scaled by 1/f and column i by f equalizes the norms.
        s(i) /= f;
        work.row(i) /= f;
        work.col(i) *= f;
      }
    }
  }
  return s;
}

LmiBlocks scale_blocks(const LmiBlocks& blocks, const Vector& s) {
  if (s.size() != blocks.size()) throw AssemblyError("scale_blocks: scaling has the wrong size");
  const Vector inv = s.cwiseInverse();
  LmiBlocks out = blocks;
  out.Acal = s.asDiagonal() * blocks.Acal * inv.asDiagonal();
  out.B1 = s.cwiseProduct(blocks.B1);
  out.B2 = s.cwiseProduct(blocks.B2);
  out.Kbar = blocks.Kbar * inv.asDiagonal();
  out.Qbar = inv.asDiagonal() * blocks.Qbar * inv.asDiagonal();
  return out;
}

MinLReport find_min_l(const PlantModel& plant, const DynamicController& ctrl, int l_max,
                      const SolverOptions& opts, int threads) {
  if (l_max < 1) throw DomainError("find_min_l: l_max must be >= 1");
  auto run = [&](int l) {
    LSweepEntry entry;
    entry.l = l;
    try {
      const LmiBlocks blocks = assemble_blocks(plant, ctrl, l);
      const FeasibilityResult res = solve_feasibility(blocks, opts);
      if (const auto* cert = std::get_if<Certificate>(&res)) {
        entry.status = LSweepEntry::Status::Certified;
        entry.certificate = *cert;
        entry.margin = cert->solver_margin;
      } else {
        const auto& nf = std::get<NotFound>(res);
        entry.status = LSweepEntry::Status::NotFound;
        entry.margin = nf.best_margin;
        entry.message = nf.reason;
      }
    } catch (const Error& e) {
      entry.status = LSweepEntry::Status::Error;
      entry.message = e.what();
    }
    return entry;
  };

  MinLReport report;
  report.entries.resize(static_cast<std::size_t>(l_max));
  const int workers = std::max(1, threads);
  for (int first = 1; first <= l_max; first += workers) {
    const int last = std::min(l_max, first + workers - 1);
    if (workers == 1) {
      report.entries[static_cast<std::size_t>(first - 1)] = run(first);
      continue;
    }
    std::vector<std::future<LSweepEntry>> batch;
    for (int l = first; l <= last; ++l) batch.push_back(std::async(std::launch::async, run, l));
    for (int l = first; l <= last; ++l) {
      report.entries[static_cast<std::size_t>(l - 1)] = batch[static_cast<std::size_t>(l - first)].get();
    }
  }
  for (const auto& e : report.entries) {
    if (e.status == LSweepEntry::Status::Certified) {
      report.min_feasible_l = e.l;
      break;
    }
  }
  return report;
}

}  // namespace delaycomp
