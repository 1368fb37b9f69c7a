#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sosupo/dynamics.hpp"
#include "sosupo/errors.hpp"

namespace sosupo {
namespace {

double norm(const State& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

TEST(Moehlis9, CoefficientInvariants) {
  auto c = moehlis9_coefficients();
  EXPECT_NO_THROW(verify_coefficients(c));
  EXPECT_LE(energy_conservation_residual(c), 1e-12);
  EXPECT_DOUBLE_EQ(c.alpha, 0.5);
  EXPECT_DOUBLE_EQ(c.beta, M_PI / 2);
  EXPECT_DOUBLE_EQ(c.gamma, 1.0);
  for (double l : c.lambda_decay) {
    EXPECT_GT(l, 0.0);
    EXPECT_GE(l, c.lambda_decay.front());
    EXPECT_LE(l, c.lambda_decay.back());
  }
  EXPECT_DOUBLE_EQ(c.lambda_decay[0], c.beta * c.beta);
}

TEST(Moehlis9, TranscriptionSlipIsCaught) {
  auto c = moehlis9_coefficients();
  c.N[3].value *= 1.001;
  EXPECT_THROW(verify_coefficients(c), ModelError);
  EXPECT_THROW(make_moehlis9(100.0, c), ModelError);
  auto d = moehlis9_coefficients();
  d.lambda_decay[4] = 100.0;
  EXPECT_THROW(verify_coefficients(d), ModelError);
}

TEST(Moehlis9, LaminarStateAndSymmetries) {
  auto sys = make_moehlis9(100.0);
  VectorField field(sys.f);
  State al(9, 0.0);
  al[0] = 1.0;
  EXPECT_LE(norm(field(al)), 1e-12);
  ASSERT_TRUE(sys.symmetry_group);
  EXPECT_EQ(sys.symmetry_group->size(), 4u);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  for (const auto& T : sys.symmetry_group->non_identity()) {
    EXPECT_LE(equivariance_residual(sys.f, T), 1e-10);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      State a(9);
      for (double& v : a) v = U(rng);
      State lhs = field(T.apply(a)), rhs = T.apply(field(a));
      for (int i = 0; i < 9; ++i) worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
    }
    EXPECT_LE(worst, 1e-10);
  }
  // D at the laminar state is lambda_1 / Re.
  auto c = moehlis9_coefficients();
  EXPECT_NEAR(sys.observable("D").evaluate(al), c.lambda_decay[0] / 100.0, 1e-15);
  EXPECT_NEAR(sys.observable("E").evaluate(al), 0.0, 1e-15);
}

TEST(Moehlis9, UnitBallAbsorbsAtRe50) {
  auto sys = make_moehlis9(50.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  State a0(9);
  for (double& v : a0) v = U(rng);
  a0[0] += 1.0;
  State a = integrate_streaming(sys, a0, 1000.0, {}, nullptr);
  EXPECT_LE(norm(a), 1.0 + 1e-9);
  double worst = 0.0;
  integrate_streaming(sys, a, 500.0, {}, [&](const StepRecord& r) {
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += r.x1[i] * r.x1[i];
    worst = std::max(worst, std::sqrt(s));
  });
  EXPECT_LE(worst, 1.0 + 1e-9);
}

TEST(Moehlis9, IntegrationCommutesWithSymmetry) {
  auto sys = make_moehlis9(100.0);
  State a0{0.9, 0.05, -0.02, 0.03, 0.01, -0.04, 0.02, 0.01, -0.03};
  for (const auto& T : sys.symmetry_group->non_identity()) {
    auto tr = integrate(sys, a0, 50.0);
    auto trT = integrate(sys, T.apply(a0), 50.0);
    for (int k = 1; k <= 10; ++k) {
      double t = 5.0 * k;
      State lhs = trT.at(t), rhs = T.apply(tr.at(t));
      for (int i = 0; i < 9; ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-6);
    }
  }
}

TEST(Systems, LorenzEquilibria) {
  auto sys = make_lorenz(10, 28, 8.0 / 3.0);
  VectorField field(sys.f);
  const double r = std::sqrt(72.0);
  for (State eq : {State{r, r, 27}, State{-r, -r, 27}}) EXPECT_LE(norm(field(eq)), 1e-10);
  EXPECT_EQ(sys.known_equilibria.size(), 3u);
}

TEST(Systems, Registry) {
  EXPECT_EQ(make_system("vanderpol", {{"mu", 2.0}}).parameters.at("mu"), 2.0);
  EXPECT_EQ(make_system("moehlis9", {{"Re", 95.0}}).dimension, 9);
  EXPECT_THROW(make_system("nosuch"), ModelError);
  EXPECT_THROW(make_system("lorenz", {{"Re", 1.0}}), ModelError);
  EXPECT_THROW(make_moehlis9(-1.0), ModelError);
  EXPECT_EQ(list_systems().size(), 6u);
}

TEST(Systems, BrokenEquivarianceRejected) {
  auto x = Polynomial::variable(1, 0);
  EXPECT_THROW(make_custom("shifted", {-x + Polynomial::constant(1, 0.1)}, {},
                           SymmetryGroup::generate({LinearSymmetry::sign_flip({-1})})),
               ModelError);
}

TEST(Integrate, HarmonicReturnsAfterOnePeriod) {
  auto tr = integrate(make_harmonic(), {1.0, 0.0}, 2 * M_PI);
  EXPECT_NEAR(tr.final_state()[0], 1.0, 1e-8);
  EXPECT_NEAR(tr.final_state()[1], 0.0, 1e-8);
  EXPECT_DOUBLE_EQ(tr.times.back(), 2 * M_PI);
  for (double t : {0.3, 1.7, 4.0, 6.1}) {
    State a = tr.at(t);
    EXPECT_NEAR(a[0], std::cos(t), 1e-6);
    EXPECT_NEAR(a[1], -std::sin(t), 1e-6);
  }
}

TEST(Integrate, DecayClosedForm) {
  auto tr = integrate(make_decay(), {1.0}, 1.0);
  EXPECT_NEAR(tr.final_state()[0], std::exp(-1.0), 1e-9);
  IntegratorControl rk4;
  rk4.method = StepMethod::rk4;
  rk4.dt = 1e-3;
  auto tr4 = integrate(make_decay(), {1.0}, 1.0, rk4);
  EXPECT_NEAR(tr4.final_state()[0], std::exp(-1.0), 1e-12);
  EXPECT_EQ(tr4.stats.accepted, 1000);
}

TEST(Integrate, BlowUpAborts) {
  auto x = Polynomial::variable(1, 0);
  auto sys = make_custom("quadratic", {x * x});
  try {
    integrate(sys, {1.0}, 2.0);
    FAIL() << "expected blow-up";
  } catch (const IntegrationError& e) {
    EXPECT_NE(std::string(e.what()).find("blow-up"), std::string::npos);
  }
  EXPECT_THROW(integrate(sys, {std::nan("")}, 1.0), std::invalid_argument);
  EXPECT_THROW(integrate(sys, {1.0}, -1.0), std::invalid_argument);
}

TEST(Integrate, TrajectoryCsv) {
  auto tr = integrate(make_harmonic(), {1.0, 0.0}, 0.1);
  std::ostringstream os;
  tr.write_csv(os);
  EXPECT_EQ(os.str().substr(0, 8), "t,a1,a2\n");
  for (std::size_t k = 1; k < tr.times.size(); ++k) EXPECT_GT(tr.times[k], tr.times[k - 1]);
}

TEST(TimeAverage, Examples) {
  auto decay = make_decay();
  EXPECT_NEAR(time_average(decay, decay.observable("x2"), {3.0}, 100.0, 50.0), 0.0, 1e-8);
  auto sys = make_moehlis9(100.0);
  State al(9, 0.0);
  al[0] = 1.0;
  auto c = moehlis9_coefficients();
  EXPECT_NEAR(time_average(sys, sys.observable("D"), al, 100.0), c.lambda_decay[0] / 100.0, 1e-15);
  // Harmonic oscillator on the unit circle: average of x^2 over whole periods is 1/2.
  auto h = make_harmonic();
  IntegratorControl tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-14;
  EXPECT_NEAR(time_average(h, h.observable("x2"), {1.0, 0.0}, 20 * M_PI, 0.0, tight), 0.5, 1e-9);
  EXPECT_THROW(time_average(h, h.observable("x2"), {1.0, 0.0}, 1.0, 2.0), std::invalid_argument);
}

TEST(Monodromy, ClosedForms) {
  auto d = monodromy(make_decay(), {1.0}, 1.0);
  EXPECT_NEAR(d.M(0, 0), std::exp(-1.0), 1e-9);
  auto h = monodromy(make_harmonic(), {1.0, 0.0}, 2 * M_PI);
  EXPECT_LE((h.M - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Monodromy, MatchesFiniteDifferencesOfFlowMap) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  auto monos = monomials_up_to_degree(3, 2);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Polynomial> f(3, Polynomial(3));
    for (auto& fi : f)
      for (const auto& m : monos) fi.add_term(m, 0.5 * U(rng));
    auto sys = make_custom("random", f);
    VectorField field(f);
    oracle::Flow rhs = [&](const std::vector<double>& a) { return field(a); };
    oracle::Flow flow = [&](const std::vector<double>& a) { return oracle::rk4_flow(rhs, a, 0.5, 2000); };
    State a0{0.3 * U(rng), 0.3 * U(rng), 0.3 * U(rng)};
    IntegratorControl tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    auto res = monodromy(sys, a0, 0.5, tight);
    auto J = oracle::finite_difference_jacobian(flow, a0, 1e-6);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(res.M(i, j), J[i][j], 1e-5) << "trial " << trial;
    auto end = flow(a0);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(res.end_state[i], end[i], 1e-9);
  }
}

}  // namespace
}  // namespace sosupo
