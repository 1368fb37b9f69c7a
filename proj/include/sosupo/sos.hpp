#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sosupo/polynomial.hpp"
#include "sosupo/sdp.hpp"
#include "sosupo/symmetry.hpp"

namespace sosupo {

/// Omega = { a : g_i(a) >= 0 for all i }.
struct SemialgebraicSet {
  int dimension = 0;
  std::vector<Polynomial> constraints;

  int max_constraint_degree() const;
  void validate() const;
};

enum class AnsatzMode { full_degree, invariant_degree, custom_basis };

/// Parametrization of the auxiliary function V.
struct VAnsatz {
  AnsatzMode mode = AnsatzMode::full_degree;
  int degree = 2;
  std::optional<SymmetryGroup> symmetry_group;  // required by invariant_degree
  /// Added to V with coefficient 1, or with a free scalar when tail_scalar_free is set.
  std::optional<Polynomial> fixed_tail;
  bool tail_scalar_free = false;
  std::vector<Monomial> custom_basis;  // custom_basis mode; constants are ignored
};

enum class BoundSense { upper_bound_of_max, lower_bound_of_min };

std::string to_string(BoundSense sense);

struct CompileOptions {
  BoundSense sense = BoundSense::upper_bound_of_max;
  /// lambda - Phi - f.grad V = sigma_0 + sum sigma_i g_i (requires omega).
  bool weighted = false;
  /// Remove Gram monomials whose square can never be matched (unweighted only).
  bool prune = false;
  /// Scale Phi, f and each g_i to unit largest coefficient before assembly.
  bool scale = true;
  /// Append L - |a|^2 >= 0 to omega when set.
  std::optional<double> ball_radius_squared;
};

/// Ordered Gram basis of one PSD block.
struct GramForm {
  std::vector<Monomial> basis;
  int gram_dimension() const { return static_cast<int>(basis.size()); }
};

/// One SOS multiplier sigma (times its weight polynomial) split into PSD blocks.
struct MultiplierLayout {
  Polynomial weight;  // 1 for sigma_0, g_i otherwise (scaled)
  double weight_scale = 1.0;
  std::vector<GramForm> blocks;
  std::vector<int> sdp_blocks;
};

/// Compiled bound problem together with everything needed to map SDP variables back.
struct BoundProgram {
  SdpProblem sdp;

  // Inputs (unscaled, Phi in the caller's sense).
  std::vector<Polynomial> f;
  Polynomial phi;
  VAnsatz ansatz;
  std::optional<SemialgebraicSet> omega;
  CompileOptions options;
  std::optional<SymmetryGroup> reduction_group;

  // Bookkeeping.
  int dimension = 0;
  int degree_f = 0;
  int degree_phi = 0;
  int degree_v = 0;
  int degree_r = 0;
  double phi_scale = 1.0;  // Phi' = phi_scale * (+-Phi)
  double f_scale = 1.0;    // f' = f_scale * f
  int lambda_index = 0;
  std::vector<Polynomial> v_basis;  // V = sum c_k v_basis[k] (+ tail)
  std::vector<int> v_index;
  int tail_index = -1;  // free tail scalar, or -1
  std::vector<MultiplierLayout> multipliers;
  std::vector<Monomial> row_monomials;

  /// +-Phi scaled: the polynomial whose maximal average the SDP bounds.
  Polynomial signed_phi() const;
};

/// r(d) = max(deg Phi, deg f + d - 1).
int degree_r(int deg_phi, int deg_f, int d);

/// Monomials of degree 1..d fixed by G after averaging, one representative orbit sum each.
std::vector<Polynomial> invariant_basis(int dimension, int degree, const SymmetryGroup& G);

/// Splits a Gram basis by the sign characters of the diagonal elements of G; blocks keep the
/// basis order and are ordered by their first monomial.
std::vector<std::vector<Monomial>> partition_by_parity(const std::vector<Monomial>& basis, const SymmetryGroup& G);

/// minimize lambda s.t. lambda - Phi - f.grad V in Sigma (or the weighted set on omega).
BoundProgram compile_bound_problem(const std::vector<Polynomial>& f, const Polynomial& phi, const VAnsatz& ansatz,
                                   const std::optional<SemialgebraicSet>& omega = std::nullopt,
                                   const CompileOptions& options = {});

/// Restricts V to G-invariant functions and block-diagonalizes every Gram matrix.
/// Throws EquivarianceError when f is not equivariant or Phi / some g_i is not invariant.
BoundProgram symmetry_reduce(const BoundProgram& program, const SymmetryGroup& G);

/// Recovered SOS multiplier.
struct SosMultiplier {
  Polynomial weight;
  Polynomial sigma;
  std::vector<std::vector<Monomial>> bases;
  std::vector<Eigen::MatrixXd> grams;
};

struct BoundCertificate {
  BoundSense sense = BoundSense::upper_bound_of_max;
  double lambda = 0.0;      // bound on the extremal average of Phi in the caller's sense
  double raw_lambda = 0.0;  // bound on max of signed Phi (= lambda or -lambda)
  Polynomial V;
  std::vector<SosMultiplier> multipliers;
  double identity_residual = 0.0;           // scaled data
  double identity_residual_unscaled = 0.0;  // original data
  double gram_min_eig = 0.0;
  int degree = 0;
  SdpStatus solver_status = SdpStatus::optimal;
  double solver_gap = 0.0;
  double solve_seconds = 0.0;
};

struct CertificateTolerance {
  double identity = 1e-6;
  double gram = 1e-6;
};

/// Rebuilds lambda, V and every sigma from the solution and re-expands the polynomial identity.
/// Throws CertificateError when the solution is unusable or the identity residual is too large.
BoundCertificate extract_certificate(const BoundProgram& program, const SdpSolution& solution,
                                     const CertificateTolerance& tolerance = {});

struct BoundResult {
  BoundProgram program;
  SdpSolution solution;
  std::optional<BoundCertificate> certificate;
  std::string error;
};

BoundResult compute_bound(const std::vector<Polynomial>& f, const Polynomial& phi, const VAnsatz& ansatz,
                          const std::optional<SemialgebraicSet>& omega = std::nullopt,
                          const CompileOptions& options = {}, const std::optional<SymmetryGroup>& reduce_with = std::nullopt,
                          const SolverSettings& settings = {});

/// SOS feasibility of C - W - rate * f.grad W, posed as: maximize t with
/// C - W - rate * f.grad W - t * b(a)^T b(a) in Sigma. Feasible when t >= -margin_tol.
struct AbsorbingProgram {
  SdpProblem sdp;
  int t_index = 0;
  int c_index = -1;  // set when C is a decision variable
  double scale = 1.0;
};

AbsorbingProgram compile_absorbing_check(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate,
                                         double C, const std::optional<SymmetryGroup>& G = std::nullopt);

/// Smallest C making C - W - rate * f.grad W SOS.
AbsorbingProgram compile_absorbing_level(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate,
                                         const std::optional<SymmetryGroup>& G = std::nullopt);

struct AbsorbingResult {
  bool feasible = false;
  double margin = 0.0;  // optimal t, or minimal C for the level variant
  SdpStatus status = SdpStatus::numerical_failure;
};

AbsorbingResult check_absorbing(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate, double C,
                                const std::optional<SymmetryGroup>& G = std::nullopt, const SolverSettings& settings = {},
                                double margin_tol = 1e-7);
AbsorbingResult absorbing_level(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate,
                                const std::optional<SymmetryGroup>& G = std::nullopt, const SolverSettings& settings = {});

/// Reason the bundled solver should not attempt this problem, if any.
std::optional<std::string> size_guard(const SdpProblem& problem, int max_block = 400, int max_rows = 20000);

}  // namespace sosupo
