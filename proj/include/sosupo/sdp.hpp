#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sosupo {

/// Upper-triangle entry (row <= col) of a symmetric coefficient matrix. An off-diagonal entry
/// stands for both (row, col) and (col, row), so <A, X> picks up 2 * value * X(row, col).
struct MatrixEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct FreeEntry {
  int index = 0;
  double value = 0.0;
};

/// <A_i, X> + B_i u = rhs_i.
struct ConstraintRow {
  std::vector<MatrixEntry> matrix_entries;
  std::vector<FreeEntry> free_entries;
  double rhs = 0.0;
};

/// minimize <C, X> + c^T u  subject to  A(X) + B u = b,  X = diag(X_1, ..., X_k) PSD,  u free.
struct SdpProblem {
  std::vector<int> block_sizes;
  int num_free = 0;
  std::vector<ConstraintRow> rows;
  std::vector<MatrixEntry> objective_matrix;
  std::vector<double> objective_free;  // size num_free (or empty for zero)

  std::vector<std::string> free_names;  // optional, size num_free
  std::vector<std::string> row_names;   // optional, size rows.size()

  std::size_t num_rows() const { return rows.size(); }
  int largest_block() const;
  /// Throws std::invalid_argument on out-of-range indices, lower-triangle entries or size mismatches.
  void validate() const;
};

enum class SdpStatus { optimal, near_optimal, primal_infeasible, dual_infeasible, iteration_limit, numerical_failure };

std::string to_string(SdpStatus status);

struct SolverSettings {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iterations = 200;
  double step_fraction = 0.99;
  /// Relative diagonal shift applied to the Schur complement when its Cholesky factorization fails.
  double regularization_floor = 1e-14;
  bool verbose = false;

  void validate() const;
};

struct SdpSolution {
  std::vector<Eigen::MatrixXd> primal_blocks;
  Eigen::VectorXd free_values;
  Eigen::VectorXd dual_vector;
  SdpStatus status = SdpStatus::numerical_failure;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double pinf = 0.0;
  double dinf = 0.0;
  int iterations = 0;
  double solve_seconds = 0.0;
  std::string message;

  bool usable() const { return status == SdpStatus::optimal || status == SdpStatus::near_optimal; }
};

/// Primal-dual interior point method (HKM direction, Mehrotra predictor-corrector).
SdpSolution solve_sdp(const SdpProblem& problem, const SolverSettings& settings = {});

/// Objective values and residual norms recomputed from problem data only.
///   pinf = ||b - A(X) - B u|| / (1 + ||b||)
///   dinf = (||c - B^T y|| + max(0, -lambda_min(C - A^T y))) / (1 + ||c|| + ||C||)
///   gap  = |pobj - dobj| / (1 + |pobj| + |dobj|)
struct ResidualReport {
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double pinf = 0.0;
  double dinf = 0.0;
  double gap = 0.0;
  double min_primal_eigenvalue = 0.0;
  bool pinf_flag = false;
  bool dinf_flag = false;
  bool gap_flag = false;
  bool psd_flag = false;

  bool clean() const { return !(pinf_flag || dinf_flag || gap_flag || psd_flag); }
};

/// A metric is flagged when the recomputed value exceeds the solver-reported one by more than
/// 10x the tolerance; psd_flag is raised when a primal block has an eigenvalue below -feas_tol.
ResidualReport check_residuals(const SdpProblem& problem, const SdpSolution& solution,
                               const SolverSettings& settings = {});

/// SDPA sparse format. The problem is written as the SDPA dual form
///   max <F0, Y>  s.t.  <F_i, Y> = c_i,  Y PSD
/// with F_i = A_i, c_i = b_i, F0 = -C. Free variables become a trailing diagonal block of
/// size -2p holding (u+, u-).
void export_sdpa(const SdpProblem& problem, std::ostream& out);
std::string export_sdpa(const SdpProblem& problem);
SdpProblem import_sdpa(std::istream& in);
SdpProblem import_sdpa_string(const std::string& text);

}  // namespace sosupo
