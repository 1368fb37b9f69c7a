#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "oracles.hpp"
#include "sosupo/sdp.hpp"

namespace sosupo {
namespace {

// minimize lambda s.t. lambda I - A PSD, written as X = lambda I - A with X PSD.
SdpProblem lambda_max_problem(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  SdpProblem p;
  p.block_sizes = {n};
  p.num_free = 1;
  p.objective_free = {1.0};
  p.free_names = {"lambda"};
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      ConstraintRow row;
      row.matrix_entries.push_back({0, r, c, r == c ? 1.0 : 0.5});
      if (r == c) row.free_entries.push_back({0, -1.0});
      row.rhs = -A(r, c);
      p.rows.push_back(row);
    }
  }
  return p;
}

SdpProblem trace_one_problem() {
  SdpProblem p;
  p.block_sizes = {2};
  ConstraintRow row;
  row.matrix_entries = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  row.rhs = 1.0;
  p.rows.push_back(row);
  return p;
}

TEST(SolveSdp, EigenvalueForm) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = 2.0;
  auto sol = solve_sdp(lambda_max_problem(A));
  ASSERT_EQ(sol.status, SdpStatus::optimal) << sol.message;
  EXPECT_NEAR(sol.free_values[0], 2.0, 1e-8);
  EXPECT_LE(sol.gap, 1e-8);
  EXPECT_LE(sol.pinf, 1e-8);
  EXPECT_LE(sol.dinf, 1e-8);
}

TEST(SolveSdp, TraceFeasibility) {
  auto sol = solve_sdp(trace_one_problem());
  ASSERT_EQ(sol.status, SdpStatus::optimal) << sol.message;
  const auto& X = sol.primal_blocks[0];
  EXPECT_NEAR(X.trace(), 1.0, 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
}

TEST(SolveSdp, RandomMatricesMatchJacobi) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd A(5, 5);
    oracle::Matrix a(5, std::vector<double>(5));
    for (int r = 0; r < 5; ++r)
      for (int c = r; c < 5; ++c) {
        double v = g(rng);
        A(r, c) = A(c, r) = v;
        a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = a[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = v;
      }
    double ref = oracle::jacobi_eigenvalues(a).back();
    auto t0 = std::chrono::steady_clock::now();
    auto sol = solve_sdp(lambda_max_problem(A));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_EQ(sol.status, SdpStatus::optimal) << sol.message;
    EXPECT_NEAR(sol.free_values[0], ref, 1e-6);
    EXPECT_LT(secs, 1.0);
    auto rep = check_residuals(lambda_max_problem(A), sol);
    EXPECT_TRUE(rep.clean());
    EXPECT_GE(rep.min_primal_eigenvalue, -1e-8);
    EXPECT_GE(rep.primal_objective, rep.dual_objective - 1e-10) << rep.primal_objective - rep.dual_objective << " pinf " << rep.pinf << " dinf " << rep.dinf;
  }
}

TEST(SolveSdp, LinearRowsAndDependentColumns) {
  // lambda_max problem with a redundant copy of lambda tied by a linear row and a
  // free column that never enters any constraint nor the objective.
  Eigen::MatrixXd A(2, 2);
  A << 0.0, 1.0, 1.0, 0.0;
  auto p = lambda_max_problem(A);
  p.num_free = 3;
  p.objective_free = {0.5, 0.5, 0.0};
  p.free_names.clear();
  ConstraintRow tie;
  tie.free_entries = {{0, 1.0}, {1, -1.0}};
  p.rows.push_back(tie);
  auto sol = solve_sdp(p);
  ASSERT_EQ(sol.status, SdpStatus::optimal) << sol.message;
  EXPECT_NEAR(sol.free_values[0], 1.0, 1e-7);
  EXPECT_NEAR(sol.free_values[1], 1.0, 1e-7);
  EXPECT_TRUE(check_residuals(p, sol).clean());
}

TEST(SolveSdp, UnboundedObjectiveReported) {
  auto p = trace_one_problem();
  p.num_free = 1;
  p.objective_free = {1.0};
  auto sol = solve_sdp(p);
  EXPECT_EQ(sol.status, SdpStatus::dual_infeasible);
}

TEST(SolveSdp, InfeasibleReported) {
  // trace X = -1 with X PSD.
  auto p = trace_one_problem();
  p.rows[0].rhs = -1.0;
  auto sol = solve_sdp(p);
  EXPECT_EQ(sol.status, SdpStatus::primal_infeasible) << to_string(sol.status) << " " << sol.message;
}

TEST(SolveSdp, Deterministic) {
  Eigen::MatrixXd A(3, 3);
  A << 1, 2, 0, 2, -1, 0.5, 0, 0.5, 3;
  auto a = solve_sdp(lambda_max_problem(A));
  auto b = solve_sdp(lambda_max_problem(A));
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.primal_objective, b.primal_objective);
}

TEST(CheckResiduals, RecomputedGapAndInjectedFault) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = 2.0;
  auto p = lambda_max_problem(A);
  auto sol = solve_sdp(p);
  auto rep = check_residuals(p, sol);
  EXPECT_LE(rep.gap, 1e-8);
  EXPECT_TRUE(rep.clean());
  sol.primal_blocks[0](0, 1) += 1e-3;
  sol.primal_blocks[0](1, 0) += 1e-3;
  EXPECT_TRUE(check_residuals(p, sol).pinf_flag);
}

TEST(CheckResiduals, ZeroProblem) {
  SdpProblem p;
  SdpSolution sol;
  auto rep = check_residuals(p, sol);
  EXPECT_EQ(rep.pinf, 0.0);
  EXPECT_EQ(rep.dinf, 0.0);
  EXPECT_EQ(rep.gap, 0.0);
  EXPECT_TRUE(rep.clean());
}

TEST(Sdpa, SmallFeasibilityFile) {
  std::string text = export_sdpa(trace_one_problem());
  EXPECT_EQ(text, "1\n1\n2\n1\n1 1 1 1 1\n1 1 2 2 1\n");
}

TEST(Sdpa, IndependentParserReproducesLambda) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = 2.0;
  auto p = lambda_max_problem(A);
  std::string text = export_sdpa(p);
  auto d = oracle::parse_sdpa(text);
  EXPECT_EQ(oracle::write_sdpa(d), text);
  EXPECT_EQ(d.m, 3);
  ASSERT_EQ(d.blocks.size(), 2u);
  EXPECT_EQ(d.blocks[0], 2);
  EXPECT_EQ(d.blocks[1], -2);
  // Rebuild the problem from the oracle's view (free pair u+ - u-) and solve it.
  SdpProblem q;
  q.block_sizes = {2};
  q.num_free = 1;
  q.objective_free = {0.0};
  q.rows.resize(static_cast<std::size_t>(d.m));
  for (int i = 0; i < d.m; ++i) q.rows[static_cast<std::size_t>(i)].rhs = d.c[static_cast<std::size_t>(i)];
  for (const auto& e : d.entries) {
    if (e.blk == 2) {
      if (e.i != 1) continue;
      if (e.mat == 0) q.objective_free[0] = -e.v;
      else q.rows[static_cast<std::size_t>(e.mat - 1)].free_entries.push_back({0, e.v});
    } else if (e.mat == 0) {
      q.objective_matrix.push_back({0, e.i - 1, e.j - 1, -e.v});
    } else {
      q.rows[static_cast<std::size_t>(e.mat - 1)].matrix_entries.push_back({0, e.i - 1, e.j - 1, e.v});
    }
  }
  auto sol = solve_sdp(q);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  EXPECT_NEAR(sol.primal_objective, 2.0, 1e-8);
}

TEST(Sdpa, RoundTripIsByteIdentical) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  Eigen::MatrixXd A(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = r; c < 4; ++c) A(r, c) = A(c, r) = g(rng);
  auto p = lambda_max_problem(A);
  p.objective_matrix.push_back({0, 1, 2, 0.1 * g(rng)});
  std::string first = export_sdpa(p);
  auto q = import_sdpa_string(first);
  EXPECT_EQ(export_sdpa(q), first);
  auto s1 = solve_sdp(p), s2 = solve_sdp(q);
  EXPECT_NEAR(s1.primal_objective, s2.primal_objective, 1e-9);
}

TEST(Sdpa, UnpairedDiagonalBlockBecomesScalarBlocks) {
  std::string text = "1\n1\n-2\n1\n1 1 1 1 1\n1 1 2 2 2\n";
  auto p = import_sdpa_string(text);
  ASSERT_EQ(p.block_sizes.size(), 2u);
  EXPECT_EQ(p.num_free, 0);
  auto sol = solve_sdp(p);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
}

}  // namespace
}  // namespace sosupo
