#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "delaycomp/lmi.hpp"

namespace delaycomp {

namespace {

// One affine matrix block F(y) = C + sum_a y_a A_a of the barrier problem.
// The P-coordinates share the structure A_a = sigma (X^T E_a Y + Y^T E_a X)
// where E_a is the symmetric unit matrix of the pair (i, j); the last
// coordinate t enters through t_coef * I.
struct AffineBlock {
  Matrix C;
  Matrix X;
  Matrix Y;
  double sigma = 1.0;
  double t_coef = 0.0;

  Eigen::Index dim() const { return C.rows(); }

  Matrix value(const Matrix& P, double t) const {
    const Matrix XPY = X.transpose() * P * Y;
    Matrix F = C + sigma * (XPY + XPY.transpose());
    F.diagonal().array() += t_coef * t;
    return F;
  }
};

// Upper-triangle index pairs of an m x m symmetric matrix.
std::vector<std::pair<int, int>> triangle_pairs(int m) {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(m * (m + 1) / 2));
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) out.emplace_back(i, j);
  }
  return out;
}

Matrix unpack(const Vector& y, const std::vector<std::pair<int, int>>& pairs, int m) {
  Matrix P = Matrix::Zero(m, m);
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    const auto [i, j] = pairs[a];
    P(i, j) = y(static_cast<Eigen::Index>(a));
    P(j, i) = P(i, j);
  }
  return P;
}

class BarrierProblem {
 public:
  BarrierProblem(const LmiBlocks& blocks, double p_bound)
      : m_(blocks.size()), pairs_(triangle_pairs(m_)) {
    const int m = m_;
    const Matrix Abar = blocks.Acal + blocks.B1 * blocks.Kbar;
    Matrix W(m, m + 1);
    W << Abar, blocks.B2;
    Matrix J = Matrix::Zero(m, m + 1);
    J.leftCols(m).setIdentity();
    Matrix L0 = Matrix::Zero(m + 1, m + 1);
    L0.topLeftCorner(m, m) =
        (1.0 + blocks.D) * blocks.Kbar.transpose() * blocks.Kbar - blocks.Qbar / blocks.D;
    L0(m, m) = -1.0;

    const Matrix I = Matrix::Identity(m, m);
    // P - t I >= 0
    blocks_.push_back({Matrix::Zero(m, m), I, I, 0.5, -1.0});
    // -Lambda(P, 1) - t I >= 0
    blocks_.push_back({-L0, W, J, -1.0, -1.0});
    // p_bound I - P >= 0
    blocks_.push_back({p_bound * I, I, I, -0.5, 0.0});
  }

  int m() const { return m_; }
  Eigen::Index vars() const { return static_cast<Eigen::Index>(pairs_.size()) + 1; }
  double nu() const { return 3.0 * m_ + 1.0; }
  Matrix P(const Vector& y) const { return unpack(y.head(vars() - 1), pairs_, m_); }

  Vector pack(const Matrix& P, double t) const {
    Vector y(vars());
    for (std::size_t a = 0; a < pairs_.size(); ++a) {
      y(static_cast<Eigen::Index>(a)) = P(pairs_[a].first, pairs_[a].second);
    }
    y(vars() - 1) = t;
    return y;
  }

  // -sum log det F_b(y), or +inf if some block is not positive definite.
  double barrier(const Vector& y) const {
    const Matrix P = this->P(y);
    const double t = y(vars() - 1);
    double out = 0.0;
    for (const auto& blk : blocks_) {
      Eigen::LLT<Matrix> llt(blk.value(P, t));
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const Vector diag = llt.matrixLLT().diagonal();
      for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag(i) > 0.0)) return std::numeric_limits<double>::infinity();
        out -= 2.0 * std::log(diag(i));
      }
    }
    return out;
  }

  // Gradient and Hessian of the barrier at a strictly feasible y.
  void derivatives(const Vector& y, Vector& grad, Matrix& hess) const {
    const Eigen::Index k = vars();
    const Matrix P = this->P(y);
    const double t = y(k - 1);
    grad.setZero(k);
    hess.setZero(k, k);
    for (const auto& blk : blocks_) {
      const Eigen::Index p = blk.dim();
      Eigen::LLT<Matrix> llt(blk.value(P, t));
      if (llt.info() != Eigen::Success) throw SolverError("barrier block lost definiteness");
      // Congruence by L^{-1}: G_a = L^{-1} A_a L^{-T}, so that
      // tr(F^{-1} A_a) = tr G_a and tr(F^{-1} A_a F^{-1} A_b) = <G_a, G_b>.
      const Matrix xt = llt.matrixL().solve(blk.X.transpose());
      const Matrix yt = llt.matrixL().solve(blk.Y.transpose());
      Matrix G(p * p, k);
      for (std::size_t a = 0; a < pairs_.size(); ++a) {
        const auto [i, j] = pairs_[a];
        Eigen::Map<Matrix> Ga(G.col(static_cast<Eigen::Index>(a)).data(), p, p);
        if (i == j) {
          Ga.noalias() = blk.sigma * xt.col(i) * yt.col(i).transpose();
        } else {
          Ga.noalias() = blk.sigma * (xt.col(i) * yt.col(j).transpose() +
                                      xt.col(j) * yt.col(i).transpose());
        }
        Ga += Ga.transpose().eval();
      }
      Eigen::Map<Matrix> Gt(G.col(k - 1).data(), p, p);
      if (blk.t_coef != 0.0) {
        const Matrix Linv = llt.matrixL().solve(Matrix::Identity(p, p));
        Gt.noalias() = blk.t_coef * Linv * Linv.transpose();
      } else {
        Gt.setZero();
      }
      for (Eigen::Index a = 0; a < k; ++a) {
        Eigen::Map<const Matrix> Ga(G.col(a).data(), p, p);
        grad(a) -= Ga.trace();
      }
      hess.noalias() += G.transpose() * G;
    }
  }

 private:
  int m_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<AffineBlock> blocks_;
};

FeasibilityResult solve_unscaled(const LmiBlocks& blocks, const SolverOptions& opts) {
  const BarrierProblem prob(blocks, opts.p_bound);
  const int m = prob.m();
  const Eigen::Index k = prob.vars();

  const Matrix I = Matrix::Identity(m, m);
  const double lam_max = sym_eig(lambda_operator(blocks, I, 1.0)).eigenvalues.maxCoeff();
  if (!std::isfinite(lam_max)) throw SolverError("non-finite LMI data");
  Vector y = prob.pack(I, std::min(1.0, -lam_max) - 1.0);

  const double nu = prob.nu();
  double tau = 1.0;
  int newton = 0;
  Vector grad;
  Matrix hess;
  bool budget_exhausted = false;
  bool infeasible = false;

  auto objective = [&](const Vector& z) { return -tau * z(k - 1) + prob.barrier(z); };

  while (true) {
    // Centering by damped Newton steps.
    while (true) {
      if (newton >= opts.max_iter) {
        budget_exhausted = true;
        break;
      }
      prob.derivatives(y, grad, hess);
      grad(k - 1) -= tau;
      if (!grad.allFinite() || !hess.allFinite()) throw SolverError("non-finite barrier derivatives");
      // The Hessian is positive definite in exact arithmetic but can be very
      // badly conditioned near the boundary.
      Vector dy;
      const Eigen::LLT<Matrix> chol(hess);
      if (chol.info() == Eigen::Success) {
        dy = -chol.solve(grad);
      } else {
        dy = -Eigen::PartialPivLU<Matrix>(hess).solve(grad);
      }
      const double lam2 = -grad.dot(dy);
      ++newton;
      if (!std::isfinite(lam2)) throw SolverError("non-finite Newton decrement");
      if (lam2 / 2.0 < 1e-9) break;
      const double f0 = objective(y);
      double s = 1.0;
      bool moved = false;
      while (s >= 1e-14) {
        const Vector trial = y + s * dy;
        const double f = objective(trial);
        if (std::isfinite(f) && f <= f0 - 0.25 * s * lam2) {
          y = trial;
          moved = true;
          break;
        }
        s *= 0.5;
      }
      // No progress along the Newton direction: as centered as rounding allows.
      if (!moved) break;
    }
    if (budget_exhausted) break;
    const double t = y(k - 1);
    // On the central path the optimum is at most t + nu / tau.
    if (t + nu / tau < opts.tol) {
      infeasible = true;
      break;
    }
    if (nu / tau < 1e-6 * std::max(1.0, std::abs(t))) break;
    tau *= 10.0;
  }

  const double t = y(k - 1);
  if (infeasible) {
    return NotFound{t, newton,
                    "optimal margin bounded above by " + std::to_string(t + nu / tau)};
  }
  if (!(t > opts.tol)) {
    return NotFound{t, newton,
                    budget_exhausted ? "iteration budget exhausted" : "margin below tolerance"};
  }
  Certificate cert;
  cert.n = blocks.n;
  cert.N = blocks.N;
  cert.l = blocks.l;
  cert.D = blocks.D;
  cert.P = prob.P(y);
  cert.alpha = 1.0;
  cert.solver_margin = t;
  cert.iterations = newton;
  return cert;
}

}  // namespace

FeasibilityResult solve_feasibility(const LmiBlocks& blocks, const SolverOptions& opts) {
  if (opts.max_iter < 1 || !(opts.tol > 0.0) || !(opts.p_bound > 1.0)) {
    throw DomainError("solve_feasibility: invalid solver options");
  }
  Vector s = Vector::Ones(blocks.size());
  FeasibilityResult res = NotFound{};
  if (opts.scaling) {
    s = balancing_scaling(blocks.Acal);
    res = solve_unscaled(scale_blocks(blocks, s), opts);
  } else {
    res = solve_unscaled(blocks, opts);
  }
  if (auto* cert = std::get_if<Certificate>(&res)) {
    if (opts.scaling) cert->P = s.asDiagonal() * cert->P * s.asDiagonal();
    cert->margins = check_certificate(blocks, cert->P, cert->alpha, opts.check_tol);
    if (!cert->margins.passed) {
      return NotFound{cert->solver_margin, cert->iterations,
                      "solver point failed the independent eigenvalue check"};
    }
  }
  return res;
}

}  // namespace delaycomp
