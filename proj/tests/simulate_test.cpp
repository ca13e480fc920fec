#include "delaycomp/simulate.hpp"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

namespace delaycomp {
namespace {

PlantModel example1() {
  return {Matrix::Ones(1, 1), Vector::Ones(1), RowVector::Ones(1), 1.0};
}

PlantModel example2() {
  PlantModel p;
  p.A.resize(3, 3);
  p.A << 2, 0, 1, 1, -2, -2, 0, 1, -1;
  p.B = (Vector(3) << 0, 0, 1).finished();
  p.C = (RowVector(3) << 1, 0, 0).finished();
  p.D = 0.5;
  return p;
}

const RowVector kExample1Gain = RowVector::Constant(1, -2.0);

TEST(ReferenceScheduleTest, PiecewiseConstant) {
  ReferenceSchedule r{{{1.0, 2.0}, {3.0, -1.0}}};
  EXPECT_EQ(r.at(0.5), 0.0);
  EXPECT_EQ(r.at(1.0), 2.0);
  EXPECT_EQ(r.at(2.9), 2.0);
  EXPECT_EQ(r.at(10.0), -1.0);
  EXPECT_FALSE(r.is_zero());
  EXPECT_TRUE(ReferenceSchedule{}.is_zero());
}

TEST(SimConfigTest, GridStepDividesDelay) {
  EXPECT_DOUBLE_EQ(SimConfig::grid_step(0.01, 1.0), 0.01);
  EXPECT_DOUBLE_EQ(SimConfig::grid_step(0.3, 1.0), 0.1);
  EXPECT_DOUBLE_EQ(SimConfig::grid_step(0.03, 1.0), 1.0 / 34.0);
  EXPECT_THROW(SimConfig::grid_step(0.0, 1.0), DomainError);
}

TEST(ClosedLoopTest, ZeroDataStaysAtEquilibrium) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, kExample1Gain, 3);
  SimConfig cfg;
  cfg.t_end = 5.0;
  const Trajectory tr = simulate_closed_loop(p, c, cfg);
  EXPECT_FALSE(tr.diverged());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_EQ(tr.y[k], 0.0);
    EXPECT_EQ(tr.U[k], 0.0);
    EXPECT_EQ(tr.ud[k].norm(), 0.0);
  }
  const Trajectory ideal = simulate_ideal(p, kExample1Gain, cfg);
  for (std::size_t k = 0; k < ideal.size(); ++k) EXPECT_EQ(ideal.y[k], 0.0);
}

TEST(ClosedLoopTest, Example1DivergesThenConverges) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, kExample1Gain, 2);
  SimConfig cfg;
  cfg.t_end = 10.0;
  cfg.X0 = Vector::Ones(1);
  const Trajectory tr = simulate_closed_loop(p, c, cfg);
  ASSERT_FALSE(tr.diverged());
  // Open loop until the first controller sample arrives at t = D.
  for (std::size_t k = 1; tr.t[k] <= 1.0 + 1e-12; ++k) EXPECT_GT(std::abs(tr.X[k](0)), std::abs(tr.X[k - 1](0)));
  EXPECT_NEAR(tr.X[100](0), std::exp(1.0), 1e-4);
  EXPECT_LT(std::abs(tr.X.back()(0)), 1e-2 * std::abs(tr.X[100](0)));
}

TEST(ClosedLoopTest, ReferenceTracking) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, kExample1Gain, 3);
  SimConfig cfg;
  cfg.t_end = 150.0;
  cfg.reference = ReferenceSchedule::step(10.0, 1.0);
  const Trajectory tr = simulate_closed_loop(p, c, cfg);
  // Constants are reproduced exactly by the hats, so the equilibrium has unit
  // gain for every N.
  EXPECT_NEAR(tr.y.back(), 1.0, 1e-10);
}

TEST(IdealTest, Example1StepIsDelayedFirstOrderResponse) {
  const PlantModel p = example1();
  SimConfig cfg;
  cfg.t_end = 20.0;
  cfg.reference = ReferenceSchedule::step(10.0, 1.0);
  const Trajectory tr = simulate_ideal(p, kExample1Gain, cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.t[k];
    // A + BK = -1 and H = 1: y = 1 - e^{-(t - 11)} after the step reaches the plant.
    const double expected = t < 11.0 ? 0.0 : 1.0 - std::exp(-(t - 11.0));
    worst = std::max(worst, std::abs(tr.y[k] - expected));
  }
  // The step in r is averaged over one history interval, a time shift of
  // dt / 2 in the response.
  EXPECT_LT(worst, 0.6 * tr.dt);
  EXPECT_GT(worst, 0.4 * tr.dt * std::exp(-tr.dt));
}

TEST(IdealTest, IndependentOfControllerOrder) {
  // The ideal loop never touches the controller, so its result depends only
  // on (plant, K, cfg); the comparison for different N uses the same run.
  const PlantModel p = example2();
  const RowVector K = solve_care(p.A, p.B, Matrix::Identity(3, 3), Matrix::Identity(1, 1)).K;
  SimConfig cfg;
  cfg.dt = 0.005;
  cfg.t_end = 5.0;
  cfg.reference = ReferenceSchedule::step(1.0, 1.0);
  const Trajectory a = simulate_ideal(p, K, cfg);
  const Trajectory b = simulate_ideal(p, K, cfg);
  EXPECT_EQ(a.y, b.y);
}

TEST(IdealTest, MatchesUndelayedNominalLoop) {
  // With zero initial transport data the delayed ideal loop is the nominal
  // loop shifted by D.
  const PlantModel p = example2();
  const RowVector K = solve_care(p.A, p.B, Matrix::Identity(3, 3), Matrix::Identity(1, 1)).K;
  const double H = feedforward_gain(p, K);
  SimConfig cfg;
  cfg.dt = 0.005;
  cfg.t_end = 6.0;
  cfg.reference = ReferenceSchedule::step(0.0, 1.0);
  const Trajectory tr = simulate_ideal(p, K, cfg);
  const Matrix Acl = p.A + p.B * K;
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double s = tr.t[k] - p.D;
    if (s <= 0.0) continue;
    // X(s) = int_0^s e^{Acl (s - r)} B H dr = Acl^{-1} (e^{Acl s} - I) B H.
    const Vector x = solve_linear(Acl, Matrix((mat_exp(Acl, s) - Matrix::Identity(3, 3)) * p.B * H));
    worst = std::max(worst, std::abs(tr.y[k] - p.C.dot(x)));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(MidpointTest, SecondOrderConvergence) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, kExample1Gain, 3);
  auto final_state = [&](double dt) {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 4.0;
    cfg.X0 = Vector::Ones(1);
    cfg.u0 = [](double z) { return std::sin(3.0 * z); };
    const Trajectory tr = simulate_closed_loop(p, c, cfg);
    Vector z(1 + c.order());
    z << tr.X.back(), tr.ud.back();
    return z;
  };
  const Vector a = final_state(0.1);
  const Vector b = final_state(0.05);
  const Vector r = final_state(0.025);
  const double order = std::log2((a - b).norm() / (b - r).norm());
  EXPECT_GE(order, 1.8);
  EXPECT_LE(order, 2.2);
}

TEST(DivergenceTest, DestabilizedGainIsReported) {
  const PlantModel p = example1();
  const DynamicController c = assemble_controller(p, RowVector::Constant(1, 0.0), 2);
  SimConfig cfg;
  cfg.t_end = 50.0;
  cfg.X0 = Vector::Ones(1);
  const Trajectory tr = simulate_closed_loop(p, c, cfg);
  ASSERT_TRUE(tr.diverged());
  // X = e^t crosses 1e10 at t = ln(1e10).
  EXPECT_NEAR(tr.divergence->time, std::log(1e10), 0.05);
  EXPECT_EQ(tr.size(), static_cast<std::size_t>(std::lround(tr.divergence->time / tr.dt)));
}

TEST(CompareMetricsTest, IdenticalAndMismatchedGrids) {
  const PlantModel p = example1();
  SimConfig cfg;
  cfg.t_end = 3.0;
  cfg.X0 = Vector::Ones(1);
  const Trajectory a = simulate_ideal(p, kExample1Gain, cfg);
  const DeviationMetrics m = compare_metrics(a, a);
  EXPECT_EQ(m.sup, 0.0);
  EXPECT_EQ(m.l2, 0.0);
  cfg.t_end = 4.0;
  EXPECT_THROW(compare_metrics(a, simulate_ideal(p, kExample1Gain, cfg)), ComparisonError);
  cfg.t_end = 3.0;
  cfg.dt = 0.02;
  const Trajectory coarse = simulate_ideal(p, kExample1Gain, cfg);
  EXPECT_THROW(compare_metrics(a, coarse), ComparisonError);
}

TEST(LyapunovTraceTest, ZeroTrajectoryAndScaling) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, kExample1Gain, 2);
  const LmiBlocks b = assemble_blocks(p, c, 4);
  const Certificate cert = std::get<Certificate>(solve_feasibility(b));
  const LegendreBlock lb = build_legendre_block(4, p.D);
  SimConfig cfg;
  cfg.t_end = 3.0;
  const std::vector<double> zero = lyapunov_trace(simulate_closed_loop(p, c, cfg), cert, b, lb);
  for (double v : zero) EXPECT_EQ(v, 0.0);

  cfg.X0 = Vector::Ones(1);
  cfg.u0 = [](double z) { return z; };
  const Trajectory tr = simulate_closed_loop(p, c, cfg);
  const std::vector<double> V = lyapunov_trace(tr, cert, b, lb);
  Certificate twice = cert;
  twice.P *= 2.0;
  twice.alpha *= 2.0;
  const std::vector<double> V2 = lyapunov_trace(tr, twice, b, lb);
  for (std::size_t k = 0; k < V.size(); ++k) EXPECT_NEAR(V2[k], 2.0 * V[k], 1e-12 * V[k]);
  EXPECT_GT(V.front(), 0.0);

  const LmiBlocks other = assemble_blocks(p, c, 3);
  EXPECT_THROW(lyapunov_trace(tr, cert, other, build_legendre_block(3, p.D)), DimensionError);
  Trajectory empty = tr;
  empty.t.clear();
  EXPECT_THROW(lyapunov_trace(empty, cert, b, lb), HistoryError);
}

TEST(LyapunovTraceTest, NonincreasingOnExample1) {
  const PlantModel p = example1();
  const DynamicController c = synth_controller(p, kExample1Gain, 2);
  const LmiBlocks b = assemble_blocks(p, c, 4);
  const Certificate cert = std::get<Certificate>(solve_feasibility(b));
  SimConfig cfg;
  cfg.t_end = 15.0;
  cfg.X0 = Vector::Ones(1);
  const Trajectory tr = simulate_closed_loop(p, c, cfg);
  const std::vector<double> V = lyapunov_trace(tr, cert, b, build_legendre_block(4, p.D));
  for (std::size_t k = 1; k < V.size(); ++k) EXPECT_LT(V[k] - V[k - 1], 1e-6 * V[0] * tr.dt) << "t=" << tr.t[k];
}

TEST(CsvTest, HeaderAndPrecision) {
  const PlantModel p = example2();
  const RowVector K = solve_care(p.A, p.B, Matrix::Identity(3, 3), Matrix::Identity(1, 1)).K;
  const DynamicController c = synth_controller(p, K, 2);
  SimConfig cfg;
  cfg.t_end = 0.1;
  cfg.X0 = (Vector(3) << 1.0 / 3.0, 0, 0).finished();
  const Trajectory tr = simulate_closed_loop(p, c, cfg);
  std::ostringstream os;
  write_csv(os, tr);
  std::istringstream in(os.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "t,y,y_ideal,U,X_1,X_2,X_3,ud_1,ud_2,V");
  EXPECT_EQ(first.substr(0, 24), "0,0.33333333333333331,na");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows + 1, tr.size());
}

}  // namespace
}  // namespace delaycomp
