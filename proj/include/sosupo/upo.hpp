#pragma once

#include <complex>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sosupo/dynamics.hpp"
#include "sosupo/localize.hpp"
#include "sosupo/symmetry.hpp"

namespace sosupo {

struct OrbitGuess {
  State a0;
  double T = 0.0;
  std::string provenance;
  double recurrence_distance = 0.0;
};

struct RecurrenceOptions {
  /// Cloud points tried, lowest P first. 0 tries every point.
  std::size_t max_starts = 50;
  /// Guesses closer than this to an earlier guess (same period within 1%) are dropped.
  double dedupe_tol = 1e-3;
  IntegratorControl control;
};

/// Integrates from each start and returns the first local minimum of |a(t) - a(0)| below near_tol
/// after the trajectory has left the 2 near_tol ball, ranked by distance.
std::vector<OrbitGuess> recurrence_guesses(const OdeSystem& system, const std::vector<State>& starts, double horizon,
                                           double near_tol, const RecurrenceOptions& options = {});
std::vector<OrbitGuess> recurrence_guesses(const OdeSystem& system, const PointCloud& cloud, double horizon,
                                           double near_tol, const RecurrenceOptions& options = {});

enum class OrbitStatus { converged, no_convergence, converged_to_equilibrium };
std::string to_string(OrbitStatus status);

struct ShootingSettings {
  double tolerance = 1e-9;  // on closure_residual
  int max_iterations = 50;
  int max_halvings = 10;
  /// Golden-section search for the period over [T (1 - w), T (1 + w)]; 0 skips it.
  double period_window = 0.05;
  double equilibrium_tol = 1e-8;
  int samples = 10000;  // uniform samples stored over one period
  IntegratorControl control = tight_control();

  static IntegratorControl tight_control() {
    IntegratorControl c;
    c.rtol = 1e-12;
    c.atol = 1e-14;
    return c;
  }
};

struct PeriodicOrbit {
  std::string system;
  std::map<std::string, double> parameters;
  State a0;
  double T = 0.0;
  /// samples[k] = a(k T / N), k = 0..N-1, with derivatives for Hermite interpolation.
  std::vector<State> samples;
  std::vector<State> derivatives;
  double closure_residual = 0.0;
  std::vector<std::complex<double>> floquet;
  std::map<std::string, double> averages;
  OrbitStatus status = OrbitStatus::no_convergence;
  std::vector<double> residual_history;
  int iterations = 0;
  std::string provenance;

  bool converged() const { return status == OrbitStatus::converged; }
  /// Periodic cubic Hermite interpolation of the samples.
  State at(double t) const;
  void write_json(std::ostream& out) const;
  void write_samples_csv(std::ostream& out) const;
};

/// Single-shooting Newton on [phi_T(a) - a = 0, f(a_guess).(a - a_guess) = 0] with the monodromy
/// as Jacobian and step halving. Fills samples; floquet and averages are left empty.
PeriodicOrbit close_orbit(const OdeSystem& system, const OrbitGuess& guess, const ShootingSettings& settings = {});

/// |phi_T(a0) - a0| by direct integration.
double closure_residual(const OdeSystem& system, const State& a0, double T,
                        const IntegratorControl& control = ShootingSettings::tight_control());

/// (1/T) int_0^T phi dt by the periodic trapezoid rule on RK4 samples, doubling the sample count
/// until successive estimates differ by less than rel_tol relative.
double orbit_average(const OdeSystem& system, const PeriodicOrbit& orbit, const Polynomial& phi, double rel_tol = 1e-9);

/// Eigenvalues of the period-T monodromy matrix, sorted by modulus descending.
std::vector<std::complex<double>> floquet_multipliers(const OdeSystem& system, const PeriodicOrbit& orbit,
                                                      const IntegratorControl& control = ShootingSettings::tight_control());

/// Images of the orbit under every group element, without orbits that coincide with an earlier one
/// up to phase (sup distance < match_tol). Each image's closure residual is recomputed by integration.
std::vector<PeriodicOrbit> symmetry_images(const OdeSystem& system, const PeriodicOrbit& orbit, const SymmetryGroup& G,
                                           double match_tol = 1e-6);

/// Fraction of the stored samples with P <= epsilon.
double fraction_in_sublevel(const PeriodicOrbit& orbit, const IndicatorPoly& P, double epsilon);

/// Minimum Euclidean distance from a to the orbit, refined between samples.
double distance_to_orbit(const PeriodicOrbit& orbit, const State& a);

}  // namespace sosupo
