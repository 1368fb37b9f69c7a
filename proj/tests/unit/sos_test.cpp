#include <gtest/gtest.h>

#include <chrono>

#include "sosupo/errors.hpp"
#include "sosupo/sos.hpp"

namespace sosupo {
namespace {

Polynomial P(const char* text, int n) { return Polynomial::parse(text, n); }

VAnsatz full(int d) {
  VAnsatz a;
  a.degree = d;
  return a;
}

TEST(DegreeR, Examples) {
  EXPECT_EQ(degree_r(2, 2, 10), 11);
  EXPECT_EQ(degree_r(2, 2, 2), 3);
  EXPECT_EQ(degree_r(8, 2, 2), 8);
}

TEST(CompileBound, GramLayoutForLinearPlanarField) {
  std::vector<Polynomial> f{P("-x + y", 2), P("-x - y", 2)};
  auto prog = compile_bound_problem(f, P("x^2", 2), full(2));
  ASSERT_EQ(prog.sdp.block_sizes.size(), 1u);
  EXPECT_EQ(prog.sdp.block_sizes[0], 3);
  EXPECT_EQ(prog.sdp.num_rows(), 6u);
  ASSERT_EQ(prog.multipliers[0].blocks.size(), 1u);
  const auto& basis = prog.multipliers[0].blocks[0].basis;
  EXPECT_EQ(basis[0].to_string(), "1");
  EXPECT_EQ(basis[1].to_string(), "a1");
  EXPECT_EQ(basis[2].to_string(), "a2");
}

TEST(CompileBound, LinearDecay) {
  std::vector<Polynomial> f{P("-x", 1)};
  auto res = compute_bound(f, P("x^2", 1), full(2));
  ASSERT_TRUE(res.certificate) << res.error;
  const auto& c = *res.certificate;
  EXPECT_LE(std::abs(c.lambda), 1e-6);
  EXPECT_LE(c.identity_residual, 1e-8);
  // V = c x^2 with c >= 1/2 is optimal.
  EXPECT_GE(c.V.coefficient(Monomial(std::vector<int>{2})), 0.5 - 1e-6);
}

TEST(CompileBound, BistableConvergesToFixedPointValue) {
  std::vector<Polynomial> f{P("x - x^3", 1)};
  for (int d : {4, 6}) {
    auto t0 = std::chrono::steady_clock::now();
    auto res = compute_bound(f, P("x^2", 1), full(d));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_TRUE(res.certificate) << res.error;
    EXPECT_GE(res.certificate->lambda, 1.0 - 1e-3) << "d=" << d;
    EXPECT_LE(res.certificate->lambda, 1.0 + 1e-6) << "d=" << d;
    EXPECT_LT(secs, 10.0);
  }
}

TEST(CompileBound, LowerBoundOfMin) {
  // Every trajectory of x' = x - x^3 ends at 0 or +-1, so min average of x^2 is 0.
  std::vector<Polynomial> f{P("x - x^3", 1)};
  CompileOptions opt;
  opt.sense = BoundSense::lower_bound_of_min;
  auto res = compute_bound(f, P("x^2", 1), full(4), std::nullopt, opt);
  ASSERT_TRUE(res.certificate) << res.error;
  EXPECT_LE(res.certificate->lambda, 1e-6);
  EXPECT_GE(res.certificate->lambda, -1e-3);
}

TEST(CompileBound, MonotoneInDegree) {
  double prev = std::numeric_limits<double>::infinity();
  for (int d : {6, 8}) {
    auto res = compute_bound({P("y", 2), P("y - x^2*y - x", 2)}, P("x^2", 2), full(d));
    ASSERT_TRUE(res.certificate) << res.error;
    EXPECT_LE(res.certificate->lambda, prev + 1e-6) << "d=" << d;
    prev = res.certificate->lambda;
  }
}

TEST(CompileBound, WeightedNeedsOmega) {
  std::vector<Polynomial> f{P("-x", 1)};
  CompileOptions opt;
  opt.weighted = true;
  EXPECT_THROW(compile_bound_problem(f, P("x^2", 1), full(2), std::nullopt, opt), CompileError);
  SemialgebraicSet omega{1, {P("4 - x^2", 1)}};
  auto prog = compile_bound_problem(f, P("x^2", 1), full(2), omega, opt);
  EXPECT_EQ(prog.multipliers.size(), 2u);
  SemialgebraicSet too_high{1, {P("4 - x^6", 1)}};
  EXPECT_THROW(compile_bound_problem(f, P("x^2", 1), full(2), too_high, opt), CompileError);
}

TEST(CompileBound, WeightedOnIntervalTightensBound) {
  // x' = x - x^3 restricted to [0.5, 2]: only the fixed point x = 1 lies there.
  std::vector<Polynomial> f{P("x - x^3", 1)};
  CompileOptions opt;
  opt.weighted = true;
  opt.sense = BoundSense::lower_bound_of_min;
  SemialgebraicSet omega{1, {P("-1 + 2.5*x - x^2", 1)}};
  auto res = compute_bound(f, P("x^2", 1), full(4), omega, opt);
  ASSERT_TRUE(res.certificate) << res.error;
  EXPECT_GT(res.certificate->lambda, 0.5);
  EXPECT_LE(res.certificate->lambda, 1.0 + 1e-6);
}

TEST(CompileBound, PruningKeepsOptimum) {
  std::vector<Polynomial> f{P("y", 2), P("y - x^2*y - x", 2)};
  CompileOptions opt;
  opt.prune = true;
  auto a = compute_bound(f, P("x^2", 2), full(6));
  auto b = compute_bound(f, P("x^2", 2), full(6), std::nullopt, opt);
  ASSERT_TRUE(a.certificate && b.certificate) << a.error << b.error;
  EXPECT_LE(b.program.sdp.largest_block(), a.program.sdp.largest_block());
  EXPECT_NEAR(a.certificate->lambda, b.certificate->lambda, 1e-6);
}

TEST(CompileBound, FixedAndFreeTail) {
  std::vector<Polynomial> f{P("x - x^3", 1)};
  VAnsatz a = full(3);
  a.fixed_tail = P("x^4", 1);
  auto fixed = compute_bound(f, P("x^2", 1), a);
  ASSERT_TRUE(fixed.certificate) << fixed.error;
  EXPECT_DOUBLE_EQ(fixed.certificate->V.coefficient(Monomial(std::vector<int>{4})), 1.0);
  a.tail_scalar_free = true;
  auto free = compute_bound(f, P("x^2", 1), a);
  ASSERT_TRUE(free.certificate) << free.error;
  EXPECT_LE(free.certificate->lambda, fixed.certificate->lambda + 1e-6);
}

TEST(SymmetryReduce, ParitySplitOfQuadraticBasis) {
  auto G = SymmetryGroup::generate({LinearSymmetry::sign_flip({-1})});
  std::vector<Monomial> basis = monomials_up_to_degree(1, 2);
  auto parts = partition_by_parity(basis, G);
  ASSERT_EQ(parts.size(), 2u);
  ASSERT_EQ(parts[0].size(), 2u);
  EXPECT_EQ(parts[0][0].to_string(), "1");
  EXPECT_EQ(parts[0][1].to_string(), "a1^2");
  ASSERT_EQ(parts[1].size(), 1u);
  EXPECT_EQ(parts[1][0].to_string(), "a1");
}

TEST(SymmetryReduce, SameOptimumOnBistable) {
  std::vector<Polynomial> f{P("x - x^3", 1)};
  auto G = SymmetryGroup::generate({LinearSymmetry::sign_flip({-1})});
  auto full_res = compute_bound(f, P("x^2", 1), full(6));
  auto red = compute_bound(f, P("x^2", 1), full(6), std::nullopt, {}, G);
  ASSERT_TRUE(full_res.certificate && red.certificate);
  EXPECT_NEAR(full_res.certificate->lambda, red.certificate->lambda, 1e-6);
  EXPECT_EQ(red.program.sdp.block_sizes.size(), 2u);
  // Only even V monomials survive.
  for (const auto& v : red.program.v_basis) EXPECT_EQ(v.degree() % 2, 0);
}

TEST(SymmetryReduce, RejectsBrokenEquivariance) {
  std::vector<Polynomial> lorenz{P("10*y - 10*x + 0.1", 3), P("28*x - y - x*z", 3), P("x*y - 2.6666666666666665*z", 3)};
  auto G = SymmetryGroup::generate({LinearSymmetry::sign_flip({-1, -1, 1})});
  auto prog = compile_bound_problem(lorenz, P("z", 3), full(2));
  EXPECT_THROW(symmetry_reduce(prog, G), EquivarianceError);
  lorenz[0] = P("10*y - 10*x", 3);
  auto ok = compile_bound_problem(lorenz, P("z", 3), full(2));
  EXPECT_NO_THROW(symmetry_reduce(ok, G));
  EXPECT_THROW(symmetry_reduce(compile_bound_problem(lorenz, P("x", 3), full(2)), G), EquivarianceError);
}

TEST(SymmetryReduce, InvariantBasisIsInvariant) {
  auto G = SymmetryGroup::generate({LinearSymmetry({1, 0, 2}, {1, 1, -1})});
  auto basis = invariant_basis(3, 3, G);
  EXPECT_FALSE(basis.empty());
  for (const auto& v : basis)
    for (const auto& T : G.elements()) EXPECT_LE(max_coefficient_difference(compose_linear(v, T), v), 1e-15);
}

TEST(ExtractCertificate, RejectsUnusableSolution) {
  std::vector<Polynomial> f{P("-x", 1)};
  auto prog = compile_bound_problem(f, P("x^2", 1), full(2));
  SdpSolution sol;
  sol.status = SdpStatus::primal_infeasible;
  EXPECT_THROW(extract_certificate(prog, sol), CertificateError);
}

TEST(ExtractCertificate, RejectsCorruptedGram) {
  std::vector<Polynomial> f{P("-x", 1)};
  auto prog = compile_bound_problem(f, P("x^2", 1), full(2));
  auto sol = solve_sdp(prog.sdp);
  sol.primal_blocks[0](0, 0) += 1e-3;
  EXPECT_THROW(extract_certificate(prog, sol), CertificateError);
}

TEST(Absorbing, Examples) {
  auto res = check_absorbing({P("-x", 1)}, P("x^2", 1), 0.5, 1.0);
  EXPECT_TRUE(res.feasible);
  EXPECT_NEAR(res.margin, 1.0, 1e-6);

  std::vector<Polynomial> rot{P("y", 2), P("-x", 2)};
  EXPECT_FALSE(check_absorbing(rot, P("x^2 + y^2", 2), 1.0, 0.0).feasible);
  EXPECT_FALSE(check_absorbing(rot, P("x^2 + y^2", 2), 1.0, 1.0).feasible);

  auto level = absorbing_level({P("x - x^3", 1)}, P("x^2", 1), 1.0);
  ASSERT_EQ(level.status, SdpStatus::optimal);
  // C - x^2 - 2x^2 + 2x^4 >= 0 needs C >= 9/8.
  EXPECT_NEAR(level.margin, 9.0 / 8.0, 1e-6);
  EXPECT_THROW(compile_absorbing_check({P("-x", 1)}, P("x^2", 1), 0.0, 1.0), std::invalid_argument);
}

TEST(SizeGuard, Limits) {
  SdpProblem p;
  p.block_sizes = {401};
  EXPECT_TRUE(size_guard(p).has_value());
  p.block_sizes = {400};
  EXPECT_FALSE(size_guard(p).has_value());
  p.rows.resize(20001);
  EXPECT_TRUE(size_guard(p).has_value());
}

}  // namespace
}  // namespace sosupo
