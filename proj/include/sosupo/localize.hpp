#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sosupo/dynamics.hpp"
#include "sosupo/polynomial.hpp"
#include "sosupo/sos.hpp"

namespace sosupo {

/// P = lambda - f.grad V - Phi, with Phi negated for lower bounds of the minimum.
struct IndicatorPoly {
  Polynomial P;
  double lambda = 0.0;  // raw bound on max of the signed observable
  std::vector<double> epsilon_list;
  BoundSense sense = BoundSense::upper_bound_of_max;
  /// P vanishes identically (to 1e-10); every point is in every sublevel set.
  bool degenerate = false;

  double value(std::span<const double> a) const { return compiled_.value(a); }
  double value_and_gradient(std::span<const double> a, std::span<double> gradient) const {
    return compiled_.value_and_gradient(a, gradient);
  }

  void finalize();

 private:
  CompiledPolynomial compiled_;
};

IndicatorPoly build_indicator_poly(const BoundCertificate& cert, const std::vector<Polynomial>& f, const Polynomial& phi);
IndicatorPoly build_indicator_poly(double raw_lambda, const Polynomial& V, const std::vector<Polynomial>& f,
                                   const Polynomial& phi, BoundSense sense = BoundSense::upper_bound_of_max);

enum class KeepPolicy { final_points, full_trails };

struct SamplerConfig {
  std::vector<std::pair<double, double>> start_box;
  int n_starts = 100;
  std::uint64_t rng_seed = 1;
  double step_tol = 1e-6;
  double grad_tol = 1e-6;
  /// Successively tighter gradient tolerances; each rung restarts from the same start. Empty means {grad_tol}.
  std::vector<double> grad_tol_ladder;
  int max_iters = 500;
  std::optional<double> beta;  // Boltzmann screening of starts
  KeepPolicy keep = KeepPolicy::final_points;
  int threads = 0;  // 0 uses the hardware concurrency

  void validate(int dimension) const;
};

struct Iterate {
  State a;
  double value = 0.0;
  double grad_norm = 0.0;  // infinity norm
};

enum class BfgsStatus { step_tolerance, gradient_tolerance, iteration_limit, non_finite };
std::string to_string(BfgsStatus status);

struct BfgsResult {
  std::vector<Iterate> trail;  // every iterate from x0 with full trails, else the final point only
  BfgsStatus status = BfgsStatus::iteration_limit;
  int iterations = 0;

  const Iterate& final() const { return trail.back(); }
};

/// BFGS on the inverse Hessian with a strong Wolfe line search (c1 = 1e-4, c2 = 0.9). Stops when
/// ||s|| / max(1, ||x||) < step_tol, ||grad P||_inf < grad_tol, or after max_iters.
BfgsResult bfgs_minimize(const IndicatorPoly& P, const State& x0, const SamplerConfig& cfg);
BfgsResult bfgs_minimize(const IndicatorPoly& P, const State& x0, const SamplerConfig& cfg, double grad_tol);

struct CloudPoint {
  State a;
  double P = 0.0;
  int run = 0;
  int iter = 0;
  int rung = 0;
  bool in_omega = true;
};

struct CloudStats {
  int runs = 0;
  long iterates = 0;
  long accepted = 0;
  int failed_runs = 0;  // non-finite values
  double min_P = 0.0;
  double max_accepted_P = 0.0;
  bool degenerate = false;
};

struct PointCloud {
  int dimension = 0;
  double epsilon = 0.0;
  std::vector<CloudPoint> points;
  CloudStats stats;
  std::string warning;

  bool empty() const { return points.empty(); }
  void write_csv(std::ostream& out) const;
  void write_json(std::ostream& out) const;
  static PointCloud read_csv(std::istream& in);
};

/// Runs cfg.n_starts minimizations from uniform starts and keeps iterates with P <= epsilon.
/// Each run draws from mt19937_64 seeded with seed_seq{rng_seed, run}, so results do not depend on threading.
PointCloud harvest(const IndicatorPoly& P, const SamplerConfig& cfg, double epsilon,
                   const std::optional<SemialgebraicSet>& omega = std::nullopt);

struct ScreenedStart {
  State a;
  double weight = 1.0;
};

/// Weights exp(-beta P(a)); beta = 0 disables screening.
std::vector<ScreenedStart> screen_starts(const IndicatorPoly& P, const std::vector<State>& candidates, double beta);

/// max(1e-6, 10 * |lambda - reference_average|).
double default_epsilon(double lambda, double reference_average);

}  // namespace sosupo
