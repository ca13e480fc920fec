#pragma once

// Dense linear-algebra kernels shared by every other module.
//
// All functions are free templates over Eigen expressions and return plain
// dynamic-size matrices of the input scalar type. The numerical constants
// (Pade thresholds, pivot and convergence tolerances) are tuned for double.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "delaycomp/errors.hpp"

namespace delaycomp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct SymEigResult {
  DenseVector<Scalar> eigenvalues;   // ascending
  DenseMatrix<Scalar> eigenvectors;  // columns, orthonormal
};

template <typename Scalar>
struct MomentIntegrals {
  DenseMatrix<Scalar> F;   // e^{Ah}
  DenseMatrix<Scalar> G1;  // int_0^h e^{As} ds
  DenseMatrix<Scalar> G2;  // int_0^h s e^{As} ds
};

template <typename Scalar>
struct CareSolution {
  DenseMatrix<Scalar> P;
  DenseMatrix<Scalar> K;  // u = K x, i.e. K = -R^{-1} B^T P
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* who) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DimensionError(std::string(who) + ": expected a non-empty square matrix, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* who) {
  if (!a.allFinite()) throw DomainError(std::string(who) + ": non-finite entries");
}

template <typename Derived>
typename Derived::Scalar norm1(const Eigen::MatrixBase<Derived>& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Pade numerator/denominator pieces: e^A ~ (V-U)^{-1}(V+U).
template <typename Scalar>
void pade_terms(const DenseMatrix<Scalar>& a, int order, DenseMatrix<Scalar>& u,
                DenseMatrix<Scalar>& v) {
  const auto n = a.rows();
  const DenseMatrix<Scalar> id = DenseMatrix<Scalar>::Identity(n, n);
  const DenseMatrix<Scalar> a2 = a * a;
  switch (order) {
    case 3: {
      const Scalar b[] = {120.0, 60.0, 12.0, 1.0};
      u = a * (b[3] * a2 + b[1] * id);
      v = b[2] * a2 + b[0] * id;
      break;
    }
    case 5: {
      const Scalar b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
      const DenseMatrix<Scalar> a4 = a2 * a2;
      u = a * (b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[4] * a4 + b[2] * a2 + b[0] * id;
      break;
    }
    case 7: {
      const Scalar b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                          25200.0,    1512.0,    56.0,      1.0};
      const DenseMatrix<Scalar> a4 = a2 * a2;
      const DenseMatrix<Scalar> a6 = a4 * a2;
      u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      break;
    }
    case 9: {
      const Scalar b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                          2162160.0,     110880.0,     3960.0,       90.0,        1.0};
      const DenseMatrix<Scalar> a4 = a2 * a2;
      const DenseMatrix<Scalar> a6 = a4 * a2;
      const DenseMatrix<Scalar> a8 = a6 * a2;
      u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      break;
    }
    default: {
      const Scalar b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                          1187353796428800.0,  129060195264000.0,   10559470521600.0,
                          670442572800.0,      33522128640.0,       1323241920.0,
                          40840800.0,          960960.0,            16380.0,
                          182.0,               1.0};
      const DenseMatrix<Scalar> a4 = a2 * a2;
      const DenseMatrix<Scalar> a6 = a4 * a2;
      const DenseMatrix<Scalar> inner_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
      u = a * (inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
          b[0] * id;
      break;
    }
  }
}

}  // namespace detail

/// Matrix exponential e^{A t}.
///
/// Scaling and squaring with diagonal Pade approximants. The approximant degree
/// m is the smallest one whose backward-error bound theta_m covers ||At||_1:
///
///   m  | theta_m
///   3  | 1.495585217958292e-2
///   5  | 2.539398330063230e-1
///   7  | 9.504178996162932e-1
///   9  | 2.097847961257068e+0
///   13 | 5.371920351148152e+0   (scaled by 2^-s beyond this, then squared s times)
template <typename Derived>
DenseMatrix<typename Derived::Scalar> mat_exp(const Eigen::MatrixBase<Derived>& a,
                                              typename Derived::Scalar t = typename Derived::Scalar(1)) {
  using Scalar = typename Derived::Scalar;
  static_assert(std::is_floating_point_v<Scalar>, "mat_exp needs a real floating-point scalar");
  detail::require_square(a, "mat_exp");
  detail::require_finite(a, "mat_exp");
  if (!std::isfinite(t)) throw DomainError("mat_exp: non-finite time argument");

  DenseMatrix<Scalar> at = a * t;
  const Scalar norm = detail::norm1(at);
  constexpr Scalar theta[] = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                              2.097847961257068e+0, 5.371920351148152e+0};
  constexpr int orders[] = {3, 5, 7, 9, 13};

  int order = 13;
  int squarings = 0;
  for (int i = 0; i < 4; ++i) {
    if (norm <= theta[i]) {
      order = orders[i];
      break;
    }
  }
  if (order == 13 && norm > theta[4]) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta[4]))));
    at /= std::ldexp(Scalar(1), squarings);
  }

  DenseMatrix<Scalar> u, v;
  detail::pade_terms<Scalar>(at, order, u, v);
  DenseMatrix<Scalar> result = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) result = (result * result).eval();
  return result;
}

/// e^{Ah}, int_0^h e^{As} ds and int_0^h s e^{As} ds from a single exponential
/// of the block upper-triangular matrix [[A, I, 0], [0, 0, I], [0, 0, 0]] h.
template <typename Derived>
MomentIntegrals<typename Derived::Scalar> expm_moment_integrals(
    const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar h) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(a, "expm_moment_integrals");
  if (!(h > 0) || !std::isfinite(h)) {
    throw DomainError("expm_moment_integrals: step must be positive and finite");
  }
  const auto n = a.rows();
  DenseMatrix<Scalar> block = DenseMatrix<Scalar>::Zero(3 * n, 3 * n);
  block.topLeftCorner(n, n) = a;
  block.block(0, n, n, n).setIdentity();
  block.block(n, 2 * n, n, n).setIdentity();
  const DenseMatrix<Scalar> e = mat_exp(block, h);

  MomentIntegrals<Scalar> out;
  out.F = e.topLeftCorner(n, n);
  out.G1 = e.block(0, n, n, n);
  // The (1,3) block is int_0^h e^{A(h-s)} s ds = h G1 - G2.
  out.G2 = h * out.G1 - e.block(0, 2 * n, n, n);
  return out;
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
template <typename Derived>
SymEigResult<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(s, "sym_eig");
  detail::require_finite(s, "sym_eig");
  const auto n = s.rows();
  DenseMatrix<Scalar> a = (s + s.transpose()) / Scalar(2);
  DenseMatrix<Scalar> v = DenseMatrix<Scalar>::Identity(n, n);
  const Scalar threshold = Scalar(1e-14) * a.norm();

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    Scalar largest = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) largest = std::max(largest, std::abs(a(p, q)));
    if (largest <= threshold) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (std::abs(apq) <= threshold) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        v.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = 0;
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });

  SymEigResult<Scalar> out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    out.eigenvalues(i) = a(src, src);
    out.eigenvectors.col(i) = v.col(src);
  }
  return out;
}

/// X with A X = B by partial-pivot LU. A pivot below 1e-13 ||A||_inf is
/// reported as SingularMatrixError carrying its index.
template <typename DerivedA, typename DerivedB>
DenseMatrix<typename DerivedA::Scalar> solve_linear(const Eigen::MatrixBase<DerivedA>& a,
                                                    const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_square(a, "solve_linear");
  if (b.rows() != a.rows()) {
    throw DimensionError("solve_linear: right-hand side has " + std::to_string(b.rows()) +
                         " rows, expected " + std::to_string(a.rows()));
  }
  detail::require_finite(a, "solve_linear");
  detail::require_finite(b, "solve_linear");

  const Scalar scale = a.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::PartialPivLU<DenseMatrix<Scalar>> lu(a);
  const auto& packed = lu.matrixLU();
  for (Eigen::Index k = 0; k < packed.rows(); ++k) {
    if (!(std::abs(packed(k, k)) >= Scalar(1e-13) * scale) || scale == 0) {
      throw SingularMatrixError("solve_linear: matrix is singular to working precision (pivot " +
                                    std::to_string(k) + ")",
                                static_cast<std::size_t>(k));
    }
  }
  return lu.solve(b);
}

/// Largest real part over the spectrum of a square matrix.
template <typename Derived>
typename Derived::Scalar spectral_abscissa(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(a, "spectral_abscissa");
  const Eigen::EigenSolver<DenseMatrix<Scalar>> es(a.eval(), false);
  return es.eigenvalues().real().maxCoeff();
}

template <typename Derived>
bool is_hurwitz(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar margin = 1e-9) {
  return spectral_abscissa(a) < -margin;
}

/// X = X^T with F^T X + X F + W = 0, by Kronecker vectorization.
template <typename DerivedF, typename DerivedW>
DenseMatrix<typename DerivedF::Scalar> solve_lyapunov(const Eigen::MatrixBase<DerivedF>& f,
                                                      const Eigen::MatrixBase<DerivedW>& w) {
  using Scalar = typename DerivedF::Scalar;
  detail::require_square(f, "solve_lyapunov");
  detail::require_square(w, "solve_lyapunov");
  if (w.rows() != f.rows()) throw DimensionError("solve_lyapunov: F and W sizes differ");
  if (spectral_abscissa(f) >= Scalar(-1e-10)) {
    throw NotHurwitzError("solve_lyapunov: F is not Hurwitz");
  }
  const auto n = f.rows();
  const DenseMatrix<Scalar> ft = f.transpose();
  // Column-major vec: vec(F^T X) = (I kron F^T) vec X, vec(X F) = (F^T kron I) vec X.
  DenseMatrix<Scalar> op = DenseMatrix<Scalar>::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    op.block(j * n, j * n, n, n) += ft;
    for (Eigen::Index i = 0; i < n; ++i) {
      op.block(j * n, i * n, n, n).diagonal().array() += ft(j, i);
    }
  }
  const DenseMatrix<Scalar> wsym = (w + w.transpose()) / Scalar(2);
  DenseVector<Scalar> rhs = -Eigen::Map<const DenseVector<Scalar>>(wsym.data(), n * n);
  const DenseVector<Scalar> x = solve_linear(op, rhs);
  DenseMatrix<Scalar> out = Eigen::Map<const DenseMatrix<Scalar>>(x.data(), n, n);
  return (out + out.transpose()) / Scalar(2);
}

/// [B, AB, ..., A^{n-1}B].
template <typename DerivedA, typename DerivedB>
DenseMatrix<typename DerivedA::Scalar> controllability_matrix(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_square(a, "controllability_matrix");
  if (b.rows() != a.rows()) throw DimensionError("controllability_matrix: B row count mismatch");
  const auto n = a.rows();
  const auto m = b.cols();
  DenseMatrix<Scalar> c(n, n * m);
  DenseMatrix<Scalar> block = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    c.middleCols(k * m, m) = block;
    block = (a * block).eval();
  }
  return c;
}

template <typename DerivedA, typename DerivedB>
bool is_controllable(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const DenseMatrix<Scalar> c = controllability_matrix(a, b);
  Eigen::ColPivHouseholderQR<DenseMatrix<Scalar>> qr(c);
  qr.setThreshold(Scalar(1e-10));
  return qr.rank() == a.rows();
}

/// Monic real polynomial with the given (conjugate-closed) roots, lowest degree first.
template <typename Scalar>
DenseVector<Scalar> real_poly_from_roots(const std::vector<std::complex<Scalar>>& roots) {
  std::vector<bool> used(roots.size(), false);
  DenseVector<Scalar> poly = DenseVector<Scalar>::Ones(1);
  auto multiply = [&poly](const DenseVector<Scalar>& factor) {
    DenseVector<Scalar> out = DenseVector<Scalar>::Zero(poly.size() + factor.size() - 1);
    for (Eigen::Index i = 0; i < poly.size(); ++i)
      for (Eigen::Index j = 0; j < factor.size(); ++j) out(i + j) += poly(i) * factor(j);
    poly = out;
  };
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    const auto& r = roots[i];
    const Scalar tol = Scalar(1e-9) * (Scalar(1) + std::abs(r));
    if (!std::isfinite(r.real()) || !std::isfinite(r.imag())) {
      throw DomainError("pole placement: non-finite pole");
    }
    if (std::abs(r.imag()) <= tol) {
      DenseVector<Scalar> f(2);
      f << -r.real(), Scalar(1);
      multiply(f);
      continue;
    }
    bool matched = false;
    for (std::size_t j = i + 1; j < roots.size(); ++j) {
      if (!used[j] && std::abs(roots[j] - std::conj(r)) <= tol) {
        used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched) throw DomainError("pole placement: poles are not closed under conjugation");
    DenseVector<Scalar> f(3);
    f << std::norm(r), Scalar(-2) * r.real(), Scalar(1);
    multiply(f);
  }
  return poly;
}

/// Single-input pole placement by Ackermann's formula; returns K with
/// spec(A + B K) equal to the requested poles.
template <typename DerivedA, typename DerivedB>
DenseMatrix<typename DerivedA::Scalar> pole_place_siso(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    const std::vector<std::complex<typename DerivedA::Scalar>>& poles) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_square(a, "pole_place_siso");
  const auto n = a.rows();
  if (b.rows() != n || b.cols() != 1) throw DimensionError("pole_place_siso: B must be n x 1");
  if (static_cast<Eigen::Index>(poles.size()) != n) {
    throw DimensionError("pole_place_siso: need exactly n poles");
  }
  const DenseVector<Scalar> poly = real_poly_from_roots(poles);
  if (!is_controllable(a, b)) throw ControllabilityError("pole_place_siso: (A, B) not controllable");

  const DenseMatrix<Scalar> ctrb = controllability_matrix(a, b);
  DenseMatrix<Scalar> p_of_a = poly(n) * DenseMatrix<Scalar>::Identity(n, n);
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    p_of_a = (a * p_of_a).eval();
    p_of_a.diagonal().array() += poly(k);
  }
  DenseVector<Scalar> last = DenseVector<Scalar>::Zero(n);
  last(n - 1) = 1;
  const DenseMatrix<Scalar> y = solve_linear(ctrb.transpose(), last);
  return -(y.transpose() * p_of_a);
}

/// Stabilizing solution of A^T P + P A - P B R^{-1} B^T P + Q = 0 by
/// Newton-Kleinman iteration. Converged once the residual falls below
/// 1e-9 max(1, ||P||_F); 50 iterations without that raise ConvergenceError.
template <typename DerivedA, typename DerivedB, typename DerivedQ, typename DerivedR>
CareSolution<typename DerivedA::Scalar> solve_care(const Eigen::MatrixBase<DerivedA>& a,
                                                   const Eigen::MatrixBase<DerivedB>& b,
                                                   const Eigen::MatrixBase<DerivedQ>& q,
                                                   const Eigen::MatrixBase<DerivedR>& r) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_square(a, "solve_care");
  detail::require_square(q, "solve_care");
  detail::require_square(r, "solve_care");
  const auto n = a.rows();
  const auto m = b.cols();
  if (b.rows() != n || q.rows() != n || r.rows() != m) {
    throw DimensionError("solve_care: inconsistent A, B, Q, R sizes");
  }
  const Eigen::LLT<DenseMatrix<Scalar>> r_chol(((r + r.transpose()) / Scalar(2)).eval());
  if (r_chol.info() != Eigen::Success) throw DomainError("solve_care: R is not positive definite");
  const DenseMatrix<Scalar> qs = (q + q.transpose()) / Scalar(2);

  DenseMatrix<Scalar> k;
  if (is_hurwitz(a)) {
    k = DenseMatrix<Scalar>::Zero(m, n);
  } else if (m == 1) {
    std::vector<std::complex<Scalar>> init;
    for (Eigen::Index i = 0; i < n; ++i) init.emplace_back(-Scalar(i + 1), Scalar(0));
    k = pole_place_siso(a, b, init);
  } else {
    throw DomainError("solve_care: multi-input initialization requires a Hurwitz A");
  }

  auto residual_of = [&](const DenseMatrix<Scalar>& p) {
    const DenseMatrix<Scalar> bt_p = b.transpose() * p;
    return (a.transpose() * p + p * a - bt_p.transpose() * r_chol.solve(bt_p) + qs).norm();
  };

  CareSolution<Scalar> out;
  for (int it = 1; it <= 50; ++it) {
    const DenseMatrix<Scalar> closed = a + b * k;
    const DenseMatrix<Scalar> p = solve_lyapunov(closed, qs + k.transpose() * r * k);
    k = -r_chol.solve(b.transpose() * p);
    const double res = static_cast<double>(residual_of(p));
    const double scale = std::max<double>(1.0, static_cast<double>(p.norm()));
    // Small residual alone leaves P one quadratic step short; also wait for
    // the update to stall.
    const bool settled = it > 1 && static_cast<double>((p - out.P).norm()) <= 1e-12 * scale;
    out.P = p;
    out.K = k;
    out.residual = res;
    out.iterations = it;
    if (res < 1e-9 * scale && settled) return out;
  }
  throw ConvergenceError("solve_care: Newton-Kleinman did not converge in 50 iterations");
}

}  // namespace delaycomp
