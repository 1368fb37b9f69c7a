#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sosupo/polynomial.hpp"
#include "sosupo/symmetry.hpp"

namespace sosupo {

using State = std::vector<double>;

/// Autonomous polynomial ODE da/dt = f(a) with its metadata.
struct OdeSystem {
  std::string name;
  int dimension = 0;
  std::vector<Polynomial> f;
  std::optional<SymmetryGroup> symmetry_group;
  std::map<std::string, Polynomial> observables;
  std::vector<State> known_equilibria;
  std::map<std::string, double> parameters;

  /// Checks dimensions, ||f(a*)|| <= 1e-10 at every known equilibrium and equivariance at
  /// 100 random points per group element. Throws ModelError.
  void validate() const;

  /// Named observable, or a polynomial parsed from `name_or_text`.
  Polynomial observable(const std::string& name_or_text) const;
};

/// Dense evaluator for f and its Jacobian.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const std::vector<Polynomial>& f);

  int dimension() const { return static_cast<int>(components_.size()); }
  void eval(const double* a, double* out) const;
  State operator()(const State& a) const;
  /// Row-major n x n Jacobian.
  void jacobian(const double* a, double* out) const;
  Eigen::MatrixXd jacobian(const State& a) const;

 private:
  std::vector<CompiledPolynomial> components_;
};

/// Nine-mode sinusoidal shear flow: f_i = lambda_1/Re delta_i1 - lambda_i a_i / Re + N_ijk a_j a_k.
struct ModelCoefficients {
  std::string version;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  std::vector<double> lambda_decay;  // 9 entries
  struct Entry {
    int i, j, k;  // 0-based
    double value;
  };
  std::vector<Entry> N;
};

ModelCoefficients moehlis9_coefficients(double Lx = 4.0 * 3.14159265358979323846, double Lz = 2.0 * 3.14159265358979323846);

/// Largest coefficient of the expanded cubic form sum_i a_i N_ijk a_j a_k.
double energy_conservation_residual(const ModelCoefficients& c);

/// Throws ModelError unless the decay rates are positive with lambda_1 <= lambda_i <= lambda_9, the
/// cubic form vanishes to 1e-12 and N_111 = 0.
void verify_coefficients(const ModelCoefficients& c);

OdeSystem make_vanderpol(double mu = 1.0);
OdeSystem make_lorenz(double sigma = 10.0, double rho = 28.0, double beta = 8.0 / 3.0);
OdeSystem make_moehlis9(double Re);
OdeSystem make_moehlis9(double Re, const ModelCoefficients& coefficients);
OdeSystem make_harmonic();
OdeSystem make_decay();
OdeSystem make_bistable();
OdeSystem make_custom(const std::string& name, std::vector<Polynomial> f,
                      std::map<std::string, Polynomial> observables = {},
                      std::optional<SymmetryGroup> group = std::nullopt);

/// Registry lookup by name; missing parameters take their defaults. Throws ModelError.
OdeSystem make_system(const std::string& name, const std::map<std::string, double>& parameters = {});

struct SystemInfo {
  std::string name;
  int dimension;
  std::map<std::string, double> defaults;
  std::string description;
};
std::vector<SystemInfo> list_systems();

enum class StepMethod { rk45, rk4 };

struct IntegratorControl {
  StepMethod method = StepMethod::rk45;
  double rtol = 1e-9;
  double atol = 1e-11;
  double dt = 1e-3;  // rk4 step
  double initial_step = 0.0;  // 0 picks one automatically
  double max_step = 0.0;      // 0 means unbounded
  double blowup_norm = 1e6;
  long max_steps = 50'000'000;

  void validate() const;
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

/// One accepted step: endpoints and derivatives, enough for cubic Hermite interpolation.
struct StepRecord {
  double t0, t1;
  const double* x0;
  const double* x1;
  const double* f0;
  const double* f1;
};

using StepObserver = std::function<void(const StepRecord&)>;

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<State> derivatives;
  StepStats stats;

  int dimension() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
  const State& final_state() const { return states.back(); }
  /// Cubic Hermite dense output. t must lie in [times.front(), times.back()].
  State at(double t) const;
  void write_csv(std::ostream& out) const;
};

/// Integrates from a0 over [0, t_end]; every accepted step is recorded.
Trajectory integrate(const OdeSystem& system, const State& a0, double t_end, const IntegratorControl& control = {});

/// Same integration without storage; `observer` sees every accepted step. Returns the end state.
State integrate_streaming(const OdeSystem& system, const State& a0, double t_end, const IntegratorControl& control,
                          const StepObserver& observer, StepStats* stats = nullptr);

/// (1/(T - transient)) int_transient^T phi dt, trapezoid on accepted steps with the endpoint
/// derivative correction h^2/12 (phi'(t0) - phi'(t1)). transient defaults to 0.2 T.
double time_average(const OdeSystem& system, const Polynomial& phi, const State& a0, double T,
                    std::optional<double> transient = std::nullopt, const IntegratorControl& control = {});

struct MonodromyResult {
  State end_state;
  Eigen::MatrixXd M;
};

/// Integrates dM/dt = J_f(a(t)) M, M(0) = I, alongside the state.
MonodromyResult monodromy(const OdeSystem& system, const State& a0, double T, const IntegratorControl& control = {});

}  // namespace sosupo
