#include "delaycomp/lmi.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "delaycomp/quadrature.hpp"

namespace delaycomp {
namespace {

PlantModel example1() {
  return {Matrix::Ones(1, 1), Vector::Ones(1), RowVector::Ones(1), 1.0};
}

// Derivative of the shifted Legendre series term by term.
double legendre_derivative(int k, double zeta, double D) {
  double out = 0.0;
  for (int i = 1; i <= k; ++i) {
    double c = std::pow(-1.0, i);
    for (int j = 1; j <= i; ++j) c *= static_cast<double>(k - i + j) / j * static_cast<double>(k + j) / j;
    out += c * i * std::pow(zeta / D, i - 1) / D;
  }
  return k % 2 == 0 ? out : -out;
}

// Composite Gauss rule on [0, D] for smooth and piecewise-smooth integrands.
template <typename F>
double integrate_window(double D, int pieces, F&& f) {
  const GaussRule rule = gauss_legendre(12);
  double acc = 0.0;
  for (int p = 0; p < pieces; ++p) {
    acc += integrate(rule, D * p / pieces, D * (p + 1) / pieces, f);
  }
  return acc;
}

TEST(LegendreTest, SpotValues) {
  EXPECT_DOUBLE_EQ(legendre_eval(0, 0.3, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(legendre_eval(1, 0.0, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(legendre_eval(1, 1.0, 1.0), 1.0);
  EXPECT_NEAR(legendre_eval(2, 0.5, 1.0), -0.5, 1e-15);
  for (int k = 0; k < 12; ++k) {
    EXPECT_NEAR(legendre_eval(k, 2.0, 2.0), 1.0, 1e-9);
    EXPECT_NEAR(legendre_eval(k, 0.0, 2.0), k % 2 == 0 ? 1.0 : -1.0, 1e-9);
  }
  EXPECT_THROW(legendre_eval(1, -0.1, 1.0), DomainError);
  EXPECT_THROW(legendre_eval(1, 1.1, 1.0), DomainError);
}

TEST(LegendreBlockTest, Patterns) {
  const LegendreBlock lb = build_legendre_block(4, 1.0);
  Matrix M(4, 4);
  M << 0, 0, 0, 0, 2, 0, 0, 0, 0, 6, 0, 0, 2, 0, 10, 0;
  EXPECT_EQ(lb.M, M);
  const LegendreBlock three = build_legendre_block(3, 2.0);
  EXPECT_EQ(three.Q.diagonal(), (Vector(3) << 1, 3, 5).finished());
  EXPECT_EQ(three.LD, Vector::Ones(3));
  EXPECT_EQ(three.L0, (Vector(3) << 1, -1, 1).finished());
  EXPECT_EQ(build_legendre_block(1, 1.0).M, Matrix::Zero(1, 1));
  EXPECT_THROW(build_legendre_block(0, 1.0), DomainError);
}

TEST(LegendreBlockTest, DerivativeIdentity) {
  for (double D : {0.5, 1.0, 1.65}) {
    const int l = 10;
    const LegendreBlock lb = build_legendre_block(l, D);
    for (int s = 0; s < 200; ++s) {
      const double z = D * s / 199.0;
      const Vector rhs = lb.M * legendre_vector(l, z, D) / D;
      for (int k = 0; k < l; ++k) {
        EXPECT_NEAR(legendre_derivative(k, z, D), rhs(k), 1e-9 * std::max(1.0, std::abs(rhs(k))))
            << "k=" << k << " zeta=" << z;
      }
    }
  }
}

TEST(LegendreBlockTest, Orthogonality) {
  const double D = 1.3;
  for (int j = 0; j < 10; ++j) {
    for (int k = 0; k < 10; ++k) {
      const double ip = integrate_window(D, 4, [&](double z) {
        return legendre_eval(j, std::min(z, D), D) * legendre_eval(k, std::min(z, D), D);
      });
      EXPECT_NEAR(ip, j == k ? D / (2 * j + 1) : 0.0, 1e-9);
    }
  }
}

TEST(LegendreBlockTest, BesselInequality) {
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double D = 1.0;
  const int l = 6;
  const LegendreBlock lb = build_legendre_block(l, D);
  for (int trial = 0; trial < 1000; ++trial) {
    // Piecewise smooth: a random trigonometric polynomial plus a jump at a
    // random breakpoint aligned with the integration pieces.
    const double a0 = unif(gen), a1 = unif(gen), a2 = unif(gen), w = 1.0 + 10.0 * std::abs(unif(gen));
    const double jump = unif(gen);
    const int brk = 1 + trial % 7;
    auto u = [&](double z) {
      return a0 + a1 * std::sin(w * z) + a2 * std::cos(3.0 * w * z) + (z >= brk / 8.0 ? jump : 0.0);
    };
    Vector omega(l);
    for (int k = 0; k < l; ++k) {
      omega(k) = integrate_window(D, 8, [&](double z) { return legendre_eval(k, std::min(z, D), D) * u(z); });
    }
    const double energy = integrate_window(D, 8, [&](double z) { return u(z) * u(z); });
    EXPECT_GE(energy - omega.dot(lb.Q * omega) / D, -1e-9) << "trial " << trial;
  }
  for (int j = 0; j < l; ++j) {
    Vector omega(l);
    for (int k = 0; k < l; ++k) {
      omega(k) = integrate_window(D, 4, [&](double z) {
        return legendre_eval(k, std::min(z, D), D) * legendre_eval(j, std::min(z, D), D);
      });
    }
    const double energy = integrate_window(D, 4, [&](double z) { return std::pow(legendre_eval(j, std::min(z, D), D), 2); });
    EXPECT_NEAR(energy - omega.dot(lb.Q * omega) / D, 0.0, 1e-9) << "mode " << j;
  }
}

class BlocksTest : public ::testing::Test {
 protected:
  void SetUp() override {
    plant_ = example1();
    ctrl_ = synth_controller(plant_, RowVector::Constant(1, -2.0), 2);
  }
  PlantModel plant_;
  DynamicController ctrl_;
};

TEST_F(BlocksTest, Example1Assembly) {
  const LmiBlocks b = assemble_blocks(plant_, ctrl_, 4);
  ASSERT_EQ(b.size(), 7);
  EXPECT_EQ(b.Acal(0, 0), 1.0);
  EXPECT_EQ(b.Acal.block(1, 0, 2, 1), ctrl_.Btilde);
  EXPECT_EQ(b.Acal.block(1, 1, 2, 2), ctrl_.Atilde);
  EXPECT_EQ(b.Acal.bottomRightCorner(4, 4), -build_legendre_block(4, 1.0).M);
  EXPECT_EQ(b.Acal.topRightCorner(3, 4), Matrix::Zero(3, 4));
  EXPECT_EQ(b.Acal.block(0, 1, 1, 2), Matrix::Zero(1, 2));
  RowVector kbar(7);
  kbar << -5.4366, -2.0000, -1.4366, 0, 0, 0, 0;
  EXPECT_LT((b.Kbar - kbar).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_EQ(b.B2.head(1), plant_.B);
  EXPECT_EQ(b.B2.tail(4), (Vector(4) << -1, 1, -1, 1).finished());
  EXPECT_EQ(b.Qbar.bottomRightCorner(4, 4).diagonal(), (Vector(4) << 1, 3, 5, 7).finished());
  EXPECT_EQ(b.Qbar.topLeftCorner(3, 3), Matrix::Zero(3, 3));

  const LmiBlocks two = assemble_blocks(plant_, ctrl_, 2);
  EXPECT_EQ(two.B1, (Vector(5) << 0, 0, 0, 1, 1).finished());
}

TEST_F(BlocksTest, AssemblyErrors) {
  EXPECT_THROW(assemble_blocks(plant_, ctrl_, 0), AssemblyError);
  PlantModel bigger = plant_;
  bigger.A = Matrix::Identity(2, 2);
  bigger.B = Vector::Ones(2);
  bigger.C = RowVector::Ones(2);
  EXPECT_THROW(assemble_blocks(bigger, ctrl_, 3), AssemblyError);
  PlantModel other_delay = plant_;
  other_delay.D = 2.0;
  EXPECT_THROW(assemble_blocks(other_delay, ctrl_, 3), AssemblyError);
  const LmiBlocks b = assemble_blocks(plant_, ctrl_, 3);
  EXPECT_THROW(lambda_operator(b, Matrix::Identity(3, 3), 1.0), AssemblyError);
}

TEST_F(BlocksTest, LambdaAffineAndSymmetric) {
  const LmiBlocks b = assemble_blocks(plant_, ctrl_, 4);
  const int m = b.size();
  EXPECT_EQ(lambda_operator(b, Matrix::Zero(m, m), 0.0), Matrix::Zero(m + 1, m + 1));
  std::mt19937 gen(31);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix r1 = Matrix::NullaryExpr(m, m, [&]() { return dist(gen); });
    Matrix r2 = Matrix::NullaryExpr(m, m, [&]() { return dist(gen); });
    const Matrix P1 = r1 + r1.transpose();
    const Matrix P2 = r2 + r2.transpose();
    const double a1 = dist(gen), a2 = dist(gen);
    const Matrix L1 = lambda_operator(b, P1, a1);
    const Matrix L2 = lambda_operator(b, P2, a2);
    const Matrix L12 = lambda_operator(b, P1 + P2, a1 + a2);
    EXPECT_LT((L12 - L1 - L2).norm(), 1e-12 * L12.norm());
    EXPECT_LT((L1 - L1.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CheckCertificateTest, SyntheticFixtures) {
  // Acal = -I, no coupling: Lambda(I, 1) = diag(-2, ..., -2, -1).
  LmiBlocks b;
  b.n = 1;
  b.N = 1;
  b.l = 1;
  b.D = 1.0;
  b.Acal = -Matrix::Identity(3, 3);
  b.B1 = Vector::Zero(3);
  b.B2 = Vector::Zero(3);
  b.Kbar = RowVector::Zero(3);
  b.Qbar = Matrix::Zero(3, 3);
  const CertificateMargins ok = check_certificate(b, Matrix::Identity(3, 3), 1.0, 1e-8);
  EXPECT_TRUE(ok.passed);
  EXPECT_NEAR(ok.max_eig_Lambda, -1.0, 1e-14);
  const CertificateMargins zero = check_certificate(b, Matrix::Zero(3, 3), 1.0, 1e-8);
  EXPECT_FALSE(zero.passed);
  EXPECT_EQ(zero.min_eig_P, 0.0);
  EXPECT_FALSE(check_certificate(b, Matrix::Identity(3, 3), 0.0, 1e-8).passed);
}

TEST_F(BlocksTest, SolverFindsVerifiedCertificate) {
  const LmiBlocks b = assemble_blocks(plant_, ctrl_, 4);
  const FeasibilityResult res = solve_feasibility(b);
  ASSERT_TRUE(std::holds_alternative<Certificate>(res));
  const Certificate& cert = std::get<Certificate>(res);
  const CertificateMargins again = check_certificate(b, cert.P, cert.alpha, 1e-8);
  EXPECT_TRUE(again.passed);
  EXPECT_DOUBLE_EQ(again.max_eig_Lambda, cert.margins.max_eig_Lambda);
  EXPECT_GT(cert.solver_margin, 1e-7);
  EXPECT_LT(cert.margins.max_eig_Lambda, -cert.solver_margin * 0.99);
  EXPECT_EQ(cert.l, 4);
}

TEST_F(BlocksTest, DestabilizedGainHasNoCertificate) {
  const DynamicController bad = assemble_controller(plant_, RowVector::Constant(1, 0.0), 2);
  for (int l = 1; l <= 6; ++l) {
    const FeasibilityResult res = solve_feasibility(assemble_blocks(plant_, bad, l));
    EXPECT_TRUE(std::holds_alternative<NotFound>(res)) << "l=" << l;
  }
}

TEST(SolverTest, Example2Order3) {
  PlantModel p;
  p.A.resize(3, 3);
  p.A << 2, 0, 1, 1, -2, -2, 0, 1, -1;
  p.B = (Vector(3) << 0, 0, 1).finished();
  p.C = (RowVector(3) << 1, 0, 0).finished();
  p.D = 0.5;
  const RowVector K = solve_care(p.A, p.B, Matrix::Identity(3, 3), Matrix::Identity(1, 1)).K;
  const DynamicController c = synth_controller(p, K, 3);
  const FeasibilityResult res = solve_feasibility(assemble_blocks(p, c, 6));
  ASSERT_TRUE(std::holds_alternative<Certificate>(res));
  EXPECT_TRUE(std::get<Certificate>(res).margins.passed);
}

TEST(SolverTest, ScalingIsACongruence) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, RowVector::Constant(1, -2.0), 3);
  const LmiBlocks b = assemble_blocks(p, c, 4);
  const Vector s = balancing_scaling(b.Acal);
  const LmiBlocks sb = scale_blocks(b, s);
  // Lambda~(P~) = T^T Lambda(P) T with T = diag(s^{-1}, 1) and P = S P~ S.
  std::mt19937 gen(41);
  std::normal_distribution<double> dist;
  const int m = b.size();
  Matrix r = Matrix::NullaryExpr(m, m, [&]() { return dist(gen); });
  const Matrix Pt = r + r.transpose();
  const Matrix P = s.asDiagonal() * Pt * s.asDiagonal();
  Vector t(m + 1);
  t << s.cwiseInverse(), 1.0;
  const Matrix lhs = lambda_operator(sb, Pt, 0.7);
  const Matrix rhs = t.asDiagonal() * lambda_operator(b, P, 0.7) * t.asDiagonal();
  EXPECT_LT((lhs - rhs).norm(), 1e-12 * rhs.norm());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double e = std::log2(s(i));
    EXPECT_EQ(e, std::round(e));
  }

  SolverOptions opts;
  opts.scaling = true;
  const FeasibilityResult res = solve_feasibility(b, opts);
  ASSERT_TRUE(std::holds_alternative<Certificate>(res));
  EXPECT_TRUE(check_certificate(b, std::get<Certificate>(res).P, 1.0, 1e-8).passed);
}

TEST(FindMinLTest, StronglyStableScalarInstance) {
  const PlantModel p{-Matrix::Ones(1, 1), Vector::Ones(1), RowVector::Ones(1), 0.1};
  const DynamicController c = synth_controller(p, RowVector::Constant(1, -1.0), 2);
  const MinLReport report = find_min_l(p, c, 4);
  ASSERT_TRUE(report.min_feasible_l.has_value());
  EXPECT_LE(*report.min_feasible_l, 4);
  ASSERT_EQ(report.entries.size(), 4u);
  for (std::size_t i = 0; i < report.entries.size(); ++i) EXPECT_EQ(report.entries[i].l, static_cast<int>(i) + 1);
}

TEST(FindMinLTest, ThreadedMatchesSequential) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, RowVector::Constant(1, -2.0), 2);
  const MinLReport seq = find_min_l(p, c, 6, {}, 1);
  const MinLReport par = find_min_l(p, c, 6, {}, 4);
  ASSERT_TRUE(seq.min_feasible_l.has_value());
  EXPECT_EQ(*seq.min_feasible_l, 4);
  EXPECT_EQ(seq.min_feasible_l, par.min_feasible_l);
  for (std::size_t i = 0; i < seq.entries.size(); ++i) {
    EXPECT_EQ(seq.entries[i].status, par.entries[i].status);
    EXPECT_EQ(seq.entries[i].margin, par.entries[i].margin);
  }
  EXPECT_THROW(find_min_l(p, c, 0), DomainError);
}

}  // namespace
}  // namespace delaycomp
