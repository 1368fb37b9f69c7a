#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "sosupo/errors.hpp"
#include "sosupo/upo.hpp"

namespace sosupo {
namespace {

Polynomial P(const char* text, int n) { return Polynomial::parse(text, n); }

const PeriodicOrbit& vanderpol_orbit() {
  static const PeriodicOrbit orbit = [] {
    auto sys = make_vanderpol(1.0);
    State a = integrate_streaming(sys, {2.0, 0.0}, 100.0, {}, nullptr);
    auto guesses = recurrence_guesses(sys, std::vector<State>{a}, 30.0, 0.05);
    EXPECT_EQ(guesses.size(), 1u);
    return close_orbit(sys, guesses.at(0));
  }();
  return orbit;
}

TEST(Recurrence, Harmonic) {
  auto g = recurrence_guesses(make_harmonic(), std::vector<State>{{1.0, 0.0}}, 10.0, 0.1);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_NEAR(g[0].T, 2 * M_PI, 0.01);
}

TEST(Recurrence, DecayHasNone) {
  EXPECT_TRUE(recurrence_guesses(make_decay(), std::vector<State>{{1.0}}, 10.0, 0.1).empty());
}

TEST(Recurrence, VanDerPolFromNearbyPoint) {
  auto sys = make_vanderpol(1.0);
  const double Tref = oracle::vanderpol_period(1.0);
  auto g = recurrence_guesses(sys, std::vector<State>{{2.05, 0.02}}, 30.0, 0.1);
  ASSERT_FALSE(g.empty());
  EXPECT_NEAR(g[0].T, Tref, 0.5);
}

TEST(CloseOrbit, Harmonic) {
  auto orbit = close_orbit(make_harmonic(), {{1.1, 0.05}, 6.0, "test", 0.0});
  ASSERT_TRUE(orbit.converged()) << to_string(orbit.status);
  EXPECT_NEAR(orbit.T, 2 * M_PI, 1e-8);
  EXPECT_LE(orbit.closure_residual, 1e-9);
}

TEST(CloseOrbit, VanDerPolMatchesPeriodOracle) {
  const auto& orbit = vanderpol_orbit();
  ASSERT_TRUE(orbit.converged()) << to_string(orbit.status);
  EXPECT_LE(orbit.closure_residual, 1e-9);
  EXPECT_LE(orbit.iterations, 50);
  EXPECT_NEAR(orbit.T, oracle::vanderpol_period(1.0), 1e-6);
  // Re-integration reproduces a0.
  EXPECT_LE(closure_residual(make_vanderpol(1.0), orbit.a0, orbit.T), 1e-8);
}

TEST(CloseOrbit, EquilibriumGuessFlagged) {
  auto sys = make_lorenz(10, 28, 8.0 / 3.0);
  auto orbit = close_orbit(sys, {{0.0, 0.0, 0.0}, 1.0, "origin", 0.0});
  EXPECT_EQ(orbit.status, OrbitStatus::converged_to_equilibrium);
}

TEST(CloseOrbit, DecayDoesNotConverge) {
  ShootingSettings s;
  s.max_iterations = 5;
  auto orbit = close_orbit(make_decay(), {{1.0}, 1.0, "decay", 0.0}, s);
  EXPECT_NE(orbit.status, OrbitStatus::converged);
  EXPECT_FALSE(orbit.residual_history.empty());
}

TEST(CloseOrbit, RejectsBadGuess) {
  EXPECT_THROW(close_orbit(make_harmonic(), {{1.0, 0.0}, -1.0, "", 0.0}), std::invalid_argument);
  EXPECT_THROW(close_orbit(make_harmonic(), {{1.0}, 1.0, "", 0.0}), DimensionMismatch);
}

TEST(OrbitAverage, Harmonic) {
  auto orbit = close_orbit(make_harmonic(), {{1.0, 0.0}, 6.3, "", 0.0});
  ASSERT_TRUE(orbit.converged());
  const double r2 = orbit.a0[0] * orbit.a0[0] + orbit.a0[1] * orbit.a0[1];
  EXPECT_NEAR(orbit_average(make_harmonic(), orbit, P("x^2", 2)), 0.5 * r2, 1e-9);
}

TEST(OrbitAverage, LieDerivativeAveragesToZero) {
  auto sys = make_vanderpol(1.0);
  const auto& orbit = vanderpol_orbit();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 3; ++trial) {
    Polynomial V(2);
    for (const auto& m : monomials_up_to_degree(2, 4)) V.add_term(m, U(rng));
    EXPECT_NEAR(orbit_average(sys, orbit, lie_derivative(sys.f, V)), 0.0, 1e-8);
  }
}

TEST(OrbitAverage, VanDerPolMatchesLongTimeAverage) {
  auto sys = make_vanderpol(1.0);
  const auto& orbit = vanderpol_orbit();
  IntegratorControl tight = ShootingSettings::tight_control();
  // A window of whole periods; a 1800-unit window carries a partial-period error near 6e-4.
  const double Tref = oracle::vanderpol_period(1.0);
  double ta = time_average(sys, sys.observable("x2"), {2.0, 0.0}, 200.0 + 270 * Tref, 200.0, tight);
  const double avg = orbit_average(sys, orbit, sys.observable("x2"));
  EXPECT_NEAR(avg, ta, 1e-4);
  // Independent DOP853 (rtol 1e-12) integral over one return time of y = 0.
  EXPECT_NEAR(avg, 2.059376994841635, 1e-8);
}

TEST(Floquet, Harmonic) {
  auto orbit = close_orbit(make_harmonic(), {{1.0, 0.0}, 6.3, "", 0.0});
  for (auto m : floquet_multipliers(make_harmonic(), orbit)) EXPECT_NEAR(std::abs(m), 1.0, 1e-6);
}

TEST(Floquet, VanDerPolIsStable) {
  auto sys = make_vanderpol(1.0);
  const auto& orbit = vanderpol_orbit();
  auto mu = floquet_multipliers(sys, orbit);
  ASSERT_EQ(mu.size(), 2u);
  EXPECT_NEAR(mu[0].real(), 1.0, 1e-4);
  EXPECT_LT(std::abs(mu[1]), 1.0);
  // Oracle: the nontrivial multiplier is exp(int div f dt) = exp(int (1 - x^2) dt).
  double avg = orbit_average(sys, orbit, P("1 - x^2", 2));
  EXPECT_NEAR(std::abs(mu[1]), std::exp(avg * orbit.T), 1e-6);
  // The trivial multiplier's eigenvector is along the flow.
  auto mr = monodromy(sys, orbit.a0, orbit.T, ShootingSettings::tight_control());
  Eigen::EigenSolver<Eigen::MatrixXd> es(mr.M);
  int k = std::abs(es.eigenvalues()(0) - 1.0) < std::abs(es.eigenvalues()(1) - 1.0) ? 0 : 1;
  Eigen::Vector2d v = es.eigenvectors().col(k).real().normalized();
  State f = VectorField(sys.f)(orbit.a0);
  Eigen::Vector2d fv(f[0], f[1]);
  EXPECT_GE(std::abs(v.dot(fv.normalized())), 0.999);
}

TEST(SymmetryImages, InvariantOrbitIsSingleton) {
  auto sys = make_vanderpol(1.0);
  const auto& orbit = vanderpol_orbit();
  auto G = SymmetryGroup::generate({LinearSymmetry::sign_flip({-1, -1})});
  EXPECT_EQ(symmetry_images(sys, orbit, G).size(), 1u);
  auto copy = symmetry_images(sys, orbit, SymmetryGroup::trivial(2));
  ASSERT_EQ(copy.size(), 1u);
  EXPECT_EQ(copy[0].a0, orbit.a0);
  EXPECT_EQ(copy[0].samples, orbit.samples);
}

TEST(SymmetryImages, MirroredCycles) {
  // Unit rotation in (x, y) on the attracting planes z = +-1.
  auto sys = make_custom("hopf3", {P("-y + x - x^3 - x*y^2", 3), P("x + y - x^2*y - y^3", 3), P("z - z^3", 3)}, {},
                         SymmetryGroup::generate({LinearSymmetry::sign_flip({1, 1, -1}), LinearSymmetry::sign_flip({-1, -1, 1})}));
  auto orbit = close_orbit(sys, {{1.0, 0.01, 1.0}, 6.2, "", 0.0});
  ASSERT_TRUE(orbit.converged());
  EXPECT_NEAR(orbit.T, 2 * M_PI, 1e-8);
  auto images = symmetry_images(sys, orbit, *sys.symmetry_group);
  ASSERT_EQ(images.size(), 2u);
  EXPECT_NEAR(images[1].a0[2], -1.0, 1e-9);
  for (const auto& img : images) EXPECT_LE(img.closure_residual, 1e-8);
}

TEST(Fraction, SublevelOfHarmonicOrbit) {
  auto orbit = close_orbit(make_harmonic(), {{1.0, 0.0}, 6.3, "", 0.0});
  IndicatorPoly ip;
  ip.P = P("x^2", 2);
  ip.finalize();
  const double r = std::hypot(orbit.a0[0], orbit.a0[1]);
  // |x| <= r/2 for a third of the period.
  EXPECT_NEAR(fraction_in_sublevel(orbit, ip, 0.25 * r * r), 1.0 / 3.0, 1e-3);
  EXPECT_NEAR(distance_to_orbit(orbit, {0.0, 0.0}), r, 1e-9);
  EXPECT_NEAR(distance_to_orbit(orbit, {0.3 * r, 0.4 * r}), 0.5 * r, 1e-9);
}

TEST(OrbitArchive, JsonAndCsv) {
  auto sys = make_vanderpol(1.0);
  auto orbit = vanderpol_orbit();
  orbit.floquet = floquet_multipliers(sys, orbit);
  orbit.averages["x2"] = orbit_average(sys, orbit, sys.observable("x2"));
  std::ostringstream js;
  orbit.write_json(js);
  auto j = nlohmann::json::parse(js.str());
  EXPECT_EQ(j["schema"], "sosupo-orbit/1");
  EXPECT_EQ(j["system"], "vanderpol");
  EXPECT_DOUBLE_EQ(j["T"].get<double>(), orbit.T);
  EXPECT_EQ(j["floquet"].size(), 2u);
  std::ostringstream csv;
  orbit.write_samples_csv(csv);
  EXPECT_EQ(csv.str().substr(0, 8), "t,a1,a2\n");
}

}  // namespace
}  // namespace sosupo
