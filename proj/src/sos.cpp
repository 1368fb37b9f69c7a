#include "sosupo/sos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "sosupo/errors.hpp"

namespace sosupo {

int SemialgebraicSet::max_constraint_degree() const {
  int s = 0;
  for (const auto& g : constraints) s = std::max(s, g.degree());
  return s;
}

void SemialgebraicSet::validate() const {
  if (constraints.empty()) throw std::invalid_argument("SemialgebraicSet: no constraints");
  for (const auto& g : constraints) {
    if (g.dimension() != dimension) throw DimensionMismatch("SemialgebraicSet: constraint dimension");
    if (g.is_zero()) throw std::invalid_argument("SemialgebraicSet: zero constraint");
  }
}

std::string to_string(BoundSense sense) {
  return sense == BoundSense::upper_bound_of_max ? "max" : "min";
}

Polynomial BoundProgram::signed_phi() const {
  Polynomial p = options.sense == BoundSense::lower_bound_of_min ? -phi : phi;
  return p * phi_scale;
}

int degree_r(int deg_phi, int deg_f, int d) {
  if (deg_phi < 0 || deg_f < 0 || d < 0) throw std::invalid_argument("degree_r: negative degree");
  return std::max(deg_phi, deg_f + d - 1);
}

std::vector<Polynomial> invariant_basis(int dimension, int degree, const SymmetryGroup& G) {
  if (G.dimension() != dimension) throw DimensionMismatch("invariant_basis: group dimension");
  std::vector<Polynomial> out;
  std::set<Monomial, GradedLexLess> seen;
  for (const auto& m : monomials_up_to_degree(dimension, degree, 1)) {
    Polynomial q = symmetrize(Polynomial::from_monomial(m), G);
    if (q.is_zero()) continue;
    const auto& [lead, c] = *q.terms().begin();
    if (!seen.insert(lead).second) continue;
    out.push_back(q * (1.0 / c));
  }
  return out;
}

std::vector<std::vector<Monomial>> partition_by_parity(const std::vector<Monomial>& basis, const SymmetryGroup& G) {
  std::vector<const LinearSymmetry*> diagonal;
  for (const auto& T : G.elements()) {
    if (T.is_diagonal() && !T.is_identity()) diagonal.push_back(&T);
  }
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<Monomial>> blocks;
  for (const auto& m : basis) {
    std::vector<int> label;
    for (const auto* T : diagonal) {
      int chi = 1;
      for (int j = 0; j < m.dimension(); ++j) {
        if (T->signs()[static_cast<std::size_t>(j)] < 0 && m[j] % 2 == 1) chi = -chi;
      }
      label.push_back(chi);
    }
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      labels.push_back(label);
      blocks.push_back({m});
    } else {
      blocks[static_cast<std::size_t>(it - labels.begin())].push_back(m);
    }
  }
  return blocks;
}

std::optional<std::string> size_guard(const SdpProblem& problem, int max_block, int max_rows) {
  std::ostringstream os;
  if (problem.largest_block() > max_block) {
    os << "largest PSD block " << problem.largest_block() << " exceeds " << max_block;
    return os.str();
  }
  if (static_cast<int>(problem.num_rows()) > max_rows) {
    os << problem.num_rows() << " equality rows exceed " << max_rows;
    return os.str();
  }
  return std::nullopt;
}

namespace {

constexpr double kEntryDropTol = 1e-14;

/// Collects coefficient-matching rows keyed by monomial.
class RowAssembler {
 public:
  explicit RowAssembler(int dimension) : dimension_(dimension) {}

  int add_block(int size) {
    sizes_.push_back(size);
    return static_cast<int>(sizes_.size()) - 1;
  }

  /// Coefficients of weight * b^T Q b.
  void add_gram(int block, const std::vector<Monomial>& basis, const Polynomial& weight) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      for (std::size_t j = i; j < basis.size(); ++j) {
        Monomial bij = basis[i] * basis[j];
        for (const auto& [g, gv] : weight.terms()) {
          auto& row = rows_[bij * g];
          row.gram[{block, static_cast<int>(i), static_cast<int>(j)}] += gv;
        }
      }
    }
  }

  void add_free(int index, const Polynomial& p) {
    for (const auto& [m, c] : p.terms()) rows_[m].free[index] += c;
  }

  void add_rhs(const Polynomial& p) {
    for (const auto& [m, c] : p.terms()) rows_[m].rhs += c;
  }

  void touch(const Monomial& m) { (void)rows_[m]; }

  /// Emits rows in graded-lex order, dropping structurally empty ones.
  SdpProblem finish(int num_free, std::vector<Monomial>* row_monomials) const {
    SdpProblem p;
    p.block_sizes = sizes_;
    p.num_free = num_free;
    for (const auto& [m, row] : rows_) {
      ConstraintRow cr;
      for (const auto& [key, v] : row.gram) {
        if (std::abs(v) <= kEntryDropTol) continue;
        const auto& [blk, i, j] = key;
        cr.matrix_entries.push_back({blk, i, j, v});
      }
      for (const auto& [idx, v] : row.free) {
        if (std::abs(v) <= kEntryDropTol) continue;
        cr.free_entries.push_back({idx, v});
      }
      cr.rhs = std::abs(row.rhs) <= kEntryDropTol ? 0.0 : row.rhs;
      if (cr.matrix_entries.empty() && cr.free_entries.empty()) {
        if (cr.rhs != 0.0) {
          throw CompileError("basis cannot cover residual monomial " + m.to_string());
        }
        continue;
      }
      p.rows.push_back(std::move(cr));
      p.row_names.push_back(m.to_string());
      if (row_monomials) row_monomials->push_back(m);
    }
    (void)dimension_;
    return p;
  }

 private:
  struct Row {
    std::map<std::tuple<int, int, int>, double> gram;
    std::map<int, double> free;
    double rhs = 0.0;
  };
  int dimension_;
  std::vector<int> sizes_;
  std::map<Monomial, Row, GradedLexLess> rows_;
};

int max_degree(const std::vector<Polynomial>& ps) {
  int d = 0;
  for (const auto& p : ps) d = std::max(d, p.degree());
  return d;
}

double max_coefficient(const std::vector<Polynomial>& ps) {
  double m = 0.0;
  for (const auto& p : ps) m = std::max(m, p.max_abs_coefficient());
  return m;
}

void require_invariant(const Polynomial& p, const SymmetryGroup& G, const std::string& what) {
  for (const auto& T : G.non_identity()) {
    double r = max_coefficient_difference(compose_linear(p, T), p);
    if (r > 1e-10) {
      std::ostringstream os;
      os << what << " is not invariant under " << T.to_string() << " (residual " << r << ")";
      throw EquivarianceError(os.str());
    }
  }
}

void require_equivariant(const std::vector<Polynomial>& f, const SymmetryGroup& G) {
  for (const auto& T : G.non_identity()) {
    double r = equivariance_residual(f, T);
    if (r > 1e-10) {
      std::ostringstream os;
      os << "f is not equivariant under " << T.to_string() << " (residual " << r << ")";
      throw EquivarianceError(os.str());
    }
  }
}

std::vector<Monomial> prune_basis(std::vector<Monomial> basis, const std::set<Monomial, GradedLexLess>& support) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<Monomial, int, GradedLexLess> pair_count;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      for (std::size_t j = i + 1; j < basis.size(); ++j) ++pair_count[basis[i] * basis[j]];
    }
    std::vector<Monomial> kept;
    for (const auto& b : basis) {
      Monomial sq = b * b;
      if (!support.count(sq) && pair_count[sq] == 0) {
        changed = true;
        continue;
      }
      kept.push_back(b);
    }
    basis = std::move(kept);
  }
  return basis;
}

void add_multiplier(RowAssembler& rows, MultiplierLayout& layout, const std::vector<Monomial>& basis,
                    const std::optional<SymmetryGroup>& G) {
  std::vector<std::vector<Monomial>> parts;
  if (G) {
    parts = partition_by_parity(basis, *G);
  } else {
    parts = {basis};
  }
  for (auto& part : parts) {
    if (part.empty()) continue;
    int blk = rows.add_block(static_cast<int>(part.size()));
    rows.add_gram(blk, part, layout.weight);
    layout.blocks.push_back({part});
    layout.sdp_blocks.push_back(blk);
  }
}

BoundProgram compile_impl(const std::vector<Polynomial>& f, const Polynomial& phi, const VAnsatz& ansatz,
                          const std::optional<SemialgebraicSet>& omega_in, const CompileOptions& options,
                          const std::optional<SymmetryGroup>& reduction_group) {
  const int n = static_cast<int>(f.size());
  if (n == 0) throw std::invalid_argument("compile_bound_problem: empty vector field");
  for (const auto& fi : f) {
    if (fi.dimension() != n) throw DimensionMismatch("compile_bound_problem: field dimension");
  }
  if (phi.dimension() != n) throw DimensionMismatch("compile_bound_problem: observable dimension");
  if (ansatz.degree < 1) throw CompileError("compile_bound_problem: ansatz degree must be positive");
  if (ansatz.fixed_tail && ansatz.fixed_tail->dimension() != n) {
    throw DimensionMismatch("compile_bound_problem: tail dimension");
  }

  BoundProgram prog;
  prog.f = f;
  prog.phi = phi;
  prog.ansatz = ansatz;
  prog.omega = omega_in;
  prog.options = options;
  prog.reduction_group = reduction_group;
  prog.dimension = n;

  std::optional<SemialgebraicSet> omega = omega_in;
  if (omega) {
    if (omega->dimension != n) throw DimensionMismatch("compile_bound_problem: omega dimension");
    omega->validate();
  }
  if (options.ball_radius_squared) {
    if (!omega) omega = SemialgebraicSet{n, {}};
    omega->constraints.push_back(Polynomial::constant(n, *options.ball_radius_squared) - squared_norm(n));
  }
  if (options.weighted && !omega) throw CompileError("weighted SOS requires a semialgebraic set");

  std::optional<SymmetryGroup> group = reduction_group;
  if (!group && ansatz.mode == AnsatzMode::invariant_degree) {
    if (!ansatz.symmetry_group) throw CompileError("invariant ansatz requires a symmetry group");
    group = ansatz.symmetry_group;
  }
  if (group && group->dimension() != n) throw DimensionMismatch("compile_bound_problem: group dimension");

  // Scaling.
  Polynomial sphi = options.sense == BoundSense::lower_bound_of_min ? -phi : phi;
  prog.phi_scale = 1.0;
  prog.f_scale = 1.0;
  if (options.scale) {
    double mp = sphi.max_abs_coefficient();
    double mf = max_coefficient(f);
    if (mp > 0) prog.phi_scale = 1.0 / mp;
    if (mf > 0) prog.f_scale = 1.0 / mf;
  }
  const double sp = prog.phi_scale, sf = prog.f_scale;
  Polynomial phi_s = sphi * sp;
  std::vector<Polynomial> f_s;
  for (const auto& fi : f) f_s.push_back(fi * sf);

  // V basis.
  if (ansatz.mode == AnsatzMode::custom_basis) {
    std::set<Monomial, GradedLexLess> seen;
    for (const auto& m : ansatz.custom_basis) {
      if (m.dimension() != n) throw DimensionMismatch("compile_bound_problem: custom basis dimension");
      if (m.degree() == 0) continue;
      Polynomial q = Polynomial::from_monomial(m);
      if (group) {
        q = symmetrize(q, *group);
        if (q.is_zero()) continue;
      }
      const auto& [lead, c] = *q.terms().begin();
      if (!seen.insert(lead).second) continue;
      prog.v_basis.push_back(q * (1.0 / c));
    }
  } else if (group) {
    prog.v_basis = invariant_basis(n, ansatz.degree, *group);
  } else {
    for (const auto& m : monomials_up_to_degree(n, ansatz.degree, 1)) prog.v_basis.push_back(Polynomial::from_monomial(m));
  }
  if (ansatz.fixed_tail && group) require_invariant(*ansatz.fixed_tail, *group, "V tail");

  // Degrees.
  prog.degree_f = max_degree(f);
  prog.degree_phi = std::max(0, phi.degree());
  prog.degree_v = ansatz.degree;
  for (const auto& v : prog.v_basis) prog.degree_v = std::max(prog.degree_v, v.degree());
  if (ansatz.fixed_tail) prog.degree_v = std::max(prog.degree_v, ansatz.fixed_tail->degree());
  prog.degree_r = degree_r(prog.degree_phi, prog.degree_f, prog.degree_v);
  const int r = prog.degree_r;

  // Free variable layout.
  int num_free = 0;
  prog.lambda_index = num_free++;
  for (std::size_t k = 0; k < prog.v_basis.size(); ++k) prog.v_index.push_back(num_free++);
  if (ansatz.fixed_tail && ansatz.tail_scalar_free) prog.tail_index = num_free++;

  RowAssembler rows(n);
  rows.touch(Monomial(n));

  std::vector<Polynomial> lie;
  lie.reserve(prog.v_basis.size());
  for (const auto& v : prog.v_basis) lie.push_back(lie_derivative(f_s, v));
  std::optional<Polynomial> tail_lie;
  if (ansatz.fixed_tail) tail_lie = lie_derivative(f_s, *ansatz.fixed_tail);

  // sigma_0.
  std::vector<Monomial> basis0 = monomials_up_to_degree(n, r / 2);
  if (options.prune && !options.weighted) {
    std::set<Monomial, GradedLexLess> support;
    support.insert(Monomial(n));
    for (const auto& [m, c] : phi_s.terms()) support.insert(m);
    for (const auto& l : lie)
      for (const auto& [m, c] : l.terms()) support.insert(m);
    if (tail_lie)
      for (const auto& [m, c] : tail_lie->terms()) support.insert(m);
    basis0 = prune_basis(basis0, support);
  }
  MultiplierLayout sigma0;
  sigma0.weight = Polynomial::constant(n, 1.0);
  add_multiplier(rows, sigma0, basis0, group);
  prog.multipliers.push_back(std::move(sigma0));

  // sigma_i g_i.
  if (options.weighted) {
    const int s = omega->max_constraint_degree();
    if (r - s < 0) throw CompileError("degree bookkeeping: r(d) is smaller than the constraint degree");
    const int half = (r - s) / 2;
    for (const auto& g : omega->constraints) {
      if (group) require_invariant(g, *group, "constraint " + g.to_string());
      MultiplierLayout lay;
      double mg = g.max_abs_coefficient();
      lay.weight_scale = options.scale && mg > 0 ? 1.0 / mg : 1.0;
      lay.weight = g * lay.weight_scale;
      add_multiplier(rows, lay, monomials_up_to_degree(n, half), group);
      prog.multipliers.push_back(std::move(lay));
    }
  }

  rows.add_free(prog.lambda_index, Polynomial::constant(n, -1.0));
  for (std::size_t k = 0; k < lie.size(); ++k) rows.add_free(prog.v_index[k], lie[k]);
  if (tail_lie) {
    if (prog.tail_index >= 0) {
      rows.add_free(prog.tail_index, *tail_lie);
    } else {
      rows.add_rhs(*tail_lie * (-sp / sf));
    }
  }
  rows.add_rhs(-phi_s);

  prog.sdp = rows.finish(num_free, &prog.row_monomials);
  prog.sdp.objective_free.assign(static_cast<std::size_t>(num_free), 0.0);
  prog.sdp.objective_free[static_cast<std::size_t>(prog.lambda_index)] = 1.0;
  prog.sdp.free_names.assign(static_cast<std::size_t>(num_free), "");
  prog.sdp.free_names[static_cast<std::size_t>(prog.lambda_index)] = "lambda";
  for (std::size_t k = 0; k < prog.v_basis.size(); ++k) {
    prog.sdp.free_names[static_cast<std::size_t>(prog.v_index[k])] = "V[" + prog.v_basis[k].to_string() + "]";
  }
  if (prog.tail_index >= 0) prog.sdp.free_names[static_cast<std::size_t>(prog.tail_index)] = "tail";
  return prog;
}

Polynomial gram_polynomial(int n, const std::vector<Monomial>& basis, const Eigen::MatrixXd& Q) {
  Polynomial p(n);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (std::size_t j = 0; j < basis.size(); ++j) {
      double q = Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (q != 0.0) p.add_term(basis[i] * basis[j], q);
    }
  }
  return p;
}

}  // namespace

BoundProgram compile_bound_problem(const std::vector<Polynomial>& f, const Polynomial& phi, const VAnsatz& ansatz,
                                   const std::optional<SemialgebraicSet>& omega, const CompileOptions& options) {
  return compile_impl(f, phi, ansatz, omega, options, std::nullopt);
}

BoundProgram symmetry_reduce(const BoundProgram& program, const SymmetryGroup& G) {
  if (G.dimension() != program.dimension) throw DimensionMismatch("symmetry_reduce: group dimension");
  require_equivariant(program.f, G);
  require_invariant(program.phi, G, "observable");
  if (program.omega) {
    for (const auto& g : program.omega->constraints) require_invariant(g, G, "constraint " + g.to_string());
  }
  return compile_impl(program.f, program.phi, program.ansatz, program.omega, program.options, G);
}

BoundCertificate extract_certificate(const BoundProgram& program, const SdpSolution& solution,
                                     const CertificateTolerance& tolerance) {
  if (!solution.usable()) {
    throw CertificateError("solver status " + to_string(solution.status) + " cannot yield a certificate");
  }
  const int n = program.dimension;
  const double sp = program.phi_scale, sf = program.f_scale;
  if (solution.free_values.size() != program.sdp.num_free ||
      solution.primal_blocks.size() != program.sdp.block_sizes.size()) {
    throw CertificateError("solution does not match the compiled program");
  }

  BoundCertificate cert;
  cert.sense = program.options.sense;
  cert.degree = program.ansatz.degree;
  cert.solver_status = solution.status;
  cert.solver_gap = solution.gap;
  cert.solve_seconds = solution.solve_seconds;

  const double lambda_s = solution.free_values[program.lambda_index];
  Polynomial V_s(n);
  for (std::size_t k = 0; k < program.v_basis.size(); ++k) {
    V_s += program.v_basis[k] * solution.free_values[program.v_index[k]];
  }
  if (program.ansatz.fixed_tail) {
    double t = program.tail_index >= 0 ? solution.free_values[program.tail_index] : sp / sf;
    V_s += *program.ansatz.fixed_tail * t;
  }

  std::vector<Polynomial> f_s;
  for (const auto& fi : program.f) f_s.push_back(fi * sf);
  Polynomial residual_s = Polynomial::constant(n, lambda_s) - program.signed_phi() - lie_derivative(f_s, V_s);

  cert.gram_min_eig = std::numeric_limits<double>::infinity();
  for (const auto& lay : program.multipliers) {
    SosMultiplier mult;
    mult.weight = lay.weight * (1.0 / lay.weight_scale);
    Polynomial sigma_s(n);
    for (std::size_t b = 0; b < lay.blocks.size(); ++b) {
      const Eigen::MatrixXd& Q = solution.primal_blocks[static_cast<std::size_t>(lay.sdp_blocks[b])];
      sigma_s += gram_polynomial(n, lay.blocks[b].basis, Q);
      mult.bases.push_back(lay.blocks[b].basis);
      mult.grams.push_back(Q * (lay.weight_scale / sp));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
      cert.gram_min_eig = std::min(cert.gram_min_eig, es.eigenvalues()(0));
    }
    residual_s -= sigma_s * lay.weight;
    mult.sigma = sigma_s * (lay.weight_scale / sp);
    cert.multipliers.push_back(std::move(mult));
  }
  if (!std::isfinite(cert.gram_min_eig)) cert.gram_min_eig = 0.0;

  cert.raw_lambda = lambda_s / sp;
  cert.lambda = cert.sense == BoundSense::lower_bound_of_min ? -cert.raw_lambda : cert.raw_lambda;
  cert.V = V_s * (sf / sp);
  cert.identity_residual = residual_s.max_abs_coefficient();

  Polynomial phi_signed = cert.sense == BoundSense::lower_bound_of_min ? -program.phi : program.phi;
  Polynomial residual = Polynomial::constant(n, cert.raw_lambda) - phi_signed - lie_derivative(program.f, cert.V);
  for (const auto& m : cert.multipliers) residual -= m.sigma * m.weight;
  cert.identity_residual_unscaled = residual.max_abs_coefficient();

  if (cert.identity_residual > tolerance.identity || cert.gram_min_eig < -tolerance.gram) {
    std::ostringstream os;
    os << "certificate rejected: identity residual " << cert.identity_residual << ", smallest Gram eigenvalue "
       << cert.gram_min_eig;
    throw CertificateError(os.str());
  }
  return cert;
}

BoundResult compute_bound(const std::vector<Polynomial>& f, const Polynomial& phi, const VAnsatz& ansatz,
                          const std::optional<SemialgebraicSet>& omega, const CompileOptions& options,
                          const std::optional<SymmetryGroup>& reduce_with, const SolverSettings& settings) {
  BoundResult res;
  res.program = reduce_with ? symmetry_reduce(compile_bound_problem(f, phi, ansatz, omega, options), *reduce_with)
                            : compile_bound_problem(f, phi, ansatz, omega, options);
  res.solution = solve_sdp(res.program.sdp, settings);
  try {
    res.certificate = extract_certificate(res.program, res.solution);
  } catch (const CertificateError& e) {
    res.error = e.what();
  }
  return res;
}

namespace {

AbsorbingProgram compile_absorbing_impl(const std::vector<Polynomial>& f, const Polynomial& W_in, double rate,
                                        std::optional<double> C, const std::optional<SymmetryGroup>& G) {
  if (!(rate > 0)) throw std::invalid_argument("absorbing check: lambda_rate must be positive");
  const int n = static_cast<int>(f.size());
  if (W_in.dimension() != n) throw DimensionMismatch("absorbing check: W dimension");
  Polynomial W = W_in;
  if (G) {
    require_equivariant(f, *G);
    W = symmetrize(W, *G);
  }
  Polynomial p = -W - lie_derivative(f, W) * rate;
  if (C) p += Polynomial::constant(n, *C);

  AbsorbingProgram out;
  double mp = std::max(p.max_abs_coefficient(), C ? 0.0 : 1.0);
  out.scale = mp > 0 ? 1.0 / mp : 1.0;
  p *= out.scale;

  const int half = std::max(0, p.degree()) / 2;
  std::vector<Monomial> basis = monomials_up_to_degree(n, half);
  RowAssembler rows(n);
  rows.touch(Monomial(n));
  MultiplierLayout lay;
  lay.weight = Polynomial::constant(n, 1.0);
  add_multiplier(rows, lay, basis, G);

  int num_free = 0;
  if (C) {
    out.t_index = num_free++;
    Polynomial bb(n);
    for (const auto& b : basis) bb.add_term(b * b, 1.0);
    rows.add_free(out.t_index, bb);
  } else {
    out.c_index = num_free++;
    out.t_index = -1;
    rows.add_free(out.c_index, Polynomial::constant(n, -out.scale));
  }
  rows.add_rhs(p);
  out.sdp = rows.finish(num_free, nullptr);
  out.sdp.objective_free.assign(static_cast<std::size_t>(num_free), 0.0);
  if (C) {
    out.sdp.objective_free[static_cast<std::size_t>(out.t_index)] = -1.0;
  } else {
    out.sdp.objective_free[static_cast<std::size_t>(out.c_index)] = 1.0;
  }
  return out;
}

}  // namespace

AbsorbingProgram compile_absorbing_check(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate,
                                         double C, const std::optional<SymmetryGroup>& G) {
  return compile_absorbing_impl(f, W, lambda_rate, C, G);
}

AbsorbingProgram compile_absorbing_level(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate,
                                         const std::optional<SymmetryGroup>& G) {
  return compile_absorbing_impl(f, W, lambda_rate, std::nullopt, G);
}

AbsorbingResult check_absorbing(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate, double C,
                                const std::optional<SymmetryGroup>& G, const SolverSettings& settings,
                                double margin_tol) {
  AbsorbingProgram prog = compile_absorbing_check(f, W, lambda_rate, C, G);
  SdpSolution sol = solve_sdp(prog.sdp, settings);
  AbsorbingResult res;
  res.status = sol.status;
  if (!sol.usable()) return res;
  double t = sol.free_values[prog.t_index];
  res.margin = t / prog.scale;
  res.feasible = t >= -margin_tol;
  return res;
}

AbsorbingResult absorbing_level(const std::vector<Polynomial>& f, const Polynomial& W, double lambda_rate,
                                const std::optional<SymmetryGroup>& G, const SolverSettings& settings) {
  AbsorbingProgram prog = compile_absorbing_level(f, W, lambda_rate, G);
  SdpSolution sol = solve_sdp(prog.sdp, settings);
  AbsorbingResult res;
  res.status = sol.status;
  if (!sol.usable()) return res;
  res.feasible = true;
  res.margin = sol.free_values[prog.c_index];
  return res;
}

}  // namespace sosupo
