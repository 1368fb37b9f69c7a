#include "sosupo/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace sosupo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int SdpProblem::largest_block() const {
  int best = 0;
  for (int s : block_sizes) best = std::max(best, s);
  return best;
}

void SdpProblem::validate() const {
  auto check_entry = [&](const MatrixEntry& e, const char* where) {
    if (e.block < 0 || e.block >= static_cast<int>(block_sizes.size())) {
      throw std::invalid_argument(std::string(where) + ": block index out of range");
    }
    const int n = block_sizes[static_cast<std::size_t>(e.block)];
    if (e.row < 0 || e.col < 0 || e.row >= n || e.col >= n) {
      throw std::invalid_argument(std::string(where) + ": entry index out of range");
    }
    if (e.row > e.col) throw std::invalid_argument(std::string(where) + ": entries must be upper triangular");
    if (!std::isfinite(e.value)) throw std::invalid_argument(std::string(where) + ": non-finite value");
  };
  for (int s : block_sizes) {
    if (s <= 0) throw std::invalid_argument("SdpProblem: block sizes must be positive");
  }
  if (num_free < 0) throw std::invalid_argument("SdpProblem: negative free variable count");
  if (!objective_free.empty() && static_cast<int>(objective_free.size()) != num_free) {
    throw std::invalid_argument("SdpProblem: objective_free size mismatch");
  }
  if (!free_names.empty() && static_cast<int>(free_names.size()) != num_free) {
    throw std::invalid_argument("SdpProblem: free_names size mismatch");
  }
  if (!row_names.empty() && row_names.size() != rows.size()) {
    throw std::invalid_argument("SdpProblem: row_names size mismatch");
  }
  for (const auto& e : objective_matrix) check_entry(e, "objective");
  for (const auto& row : rows) {
    for (const auto& e : row.matrix_entries) check_entry(e, "constraint");
    for (const auto& f : row.free_entries) {
      if (f.index < 0 || f.index >= num_free) throw std::invalid_argument("constraint: free index out of range");
      if (!std::isfinite(f.value)) throw std::invalid_argument("constraint: non-finite value");
    }
    if (!std::isfinite(row.rhs)) throw std::invalid_argument("constraint: non-finite rhs");
  }
}

std::string to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::near_optimal: return "near_optimal";
    case SdpStatus::primal_infeasible: return "primal_infeasible";
    case SdpStatus::dual_infeasible: return "dual_infeasible";
    case SdpStatus::iteration_limit: return "iteration_limit";
    case SdpStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

void SolverSettings::validate() const {
  if (!(gap_tol > 0) || !(feas_tol > 0)) throw std::invalid_argument("SolverSettings: tolerances must be positive");
  if (max_iterations <= 0) throw std::invalid_argument("SolverSettings: max_iterations must be positive");
  if (!(step_fraction > 0 && step_fraction < 1)) throw std::invalid_argument("SolverSettings: step_fraction in (0,1)");
  if (!(regularization_floor > 0)) throw std::invalid_argument("SolverSettings: regularization_floor must be positive");
}

namespace {

using Blocks = std::vector<MatrixXd>;

double inner(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

double frobenius(const Blocks& a) {
  double s = 0.0;
  for (const auto& m : a) s += m.squaredNorm();
  return std::sqrt(s);
}

Blocks zero_blocks(const std::vector<int>& sizes) {
  Blocks out;
  out.reserve(sizes.size());
  for (int s : sizes) out.push_back(MatrixXd::Zero(s, s));
  return out;
}

void add_entry(MatrixXd& m, const MatrixEntry& e, double scale) {
  m(e.row, e.col) += scale * e.value;
  if (e.row != e.col) m(e.col, e.row) += scale * e.value;
}

Blocks dense_objective(const SdpProblem& p) {
  Blocks c = zero_blocks(p.block_sizes);
  for (const auto& e : p.objective_matrix) add_entry(c[static_cast<std::size_t>(e.block)], e, 1.0);
  return c;
}

VectorXd free_objective(const SdpProblem& p) {
  VectorXd c = VectorXd::Zero(p.num_free);
  for (std::size_t j = 0; j < p.objective_free.size(); ++j) c[static_cast<Eigen::Index>(j)] = p.objective_free[j];
  return c;
}

double min_eigenvalue(const MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// <A_i, Y> for a possibly nonsymmetric Y.
double apply_row(const std::vector<MatrixEntry>& entries, const Blocks& y) {
  double s = 0.0;
  for (const auto& e : entries) {
    const MatrixXd& m = y[static_cast<std::size_t>(e.block)];
    s += e.row == e.col ? e.value * m(e.row, e.col) : e.value * (m(e.row, e.col) + m(e.col, e.row));
  }
  return s;
}

/// Reduced problem seen by the interior-point iteration: every row touches a PSD block and the
/// free columns are linearly independent.
struct Kernel {
  std::vector<int> sizes;
  std::vector<std::vector<MatrixEntry>> rows;  // upper entries per row
  MatrixXd B;                                  // m x p
  VectorXd b;
  Blocks C;
  VectorXd c;

  // Full (both triangles) expansion of each row, grouped by block.
  struct Expanded {
    int row;
    std::vector<std::tuple<int, int, double>> entries;
  };
  std::vector<std::vector<Expanded>> by_block;

  int m() const { return static_cast<int>(rows.size()); }
  int p() const { return static_cast<int>(B.cols()); }

  void build_index() {
    by_block.assign(sizes.size(), {});
    for (int i = 0; i < m(); ++i) {
      std::map<int, Expanded> per;
      for (const auto& e : rows[static_cast<std::size_t>(i)]) {
        auto& ex = per[e.block];
        ex.row = i;
        ex.entries.emplace_back(e.row, e.col, e.value);
        if (e.row != e.col) ex.entries.emplace_back(e.col, e.row, e.value);
      }
      for (auto& [blk, ex] : per) by_block[static_cast<std::size_t>(blk)].push_back(std::move(ex));
    }
  }

  VectorXd apply(const Blocks& y) const {
    VectorXd out(m());
    for (int i = 0; i < m(); ++i) out[i] = apply_row(rows[static_cast<std::size_t>(i)], y);
    return out;
  }

  Blocks adjoint(const VectorXd& y) const {
    Blocks out = zero_blocks(sizes);
    for (int i = 0; i < m(); ++i) {
      if (y[i] == 0.0) continue;
      for (const auto& e : rows[static_cast<std::size_t>(i)]) add_entry(out[static_cast<std::size_t>(e.block)], e, y[i]);
    }
    return out;
  }

  /// M_ij = tr(A_i X A_j W).
  MatrixXd schur(const Blocks& X, const Blocks& W) const {
    MatrixXd M = MatrixXd::Zero(m(), m());
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const auto& list = by_block[k];
      const MatrixXd& Xk = X[k];
      const MatrixXd& Wk = W[k];
      const int n = sizes[k];
      MatrixXd G(n, n);
      for (std::size_t ii = 0; ii < list.size(); ++ii) {
        const auto& ei = list[ii].entries;
        // G = W A_i X
        if (static_cast<int>(ei.size()) > 2 * n) {
          MatrixXd Ai = MatrixXd::Zero(n, n);
          for (const auto& [a, bb, v] : ei) Ai(a, bb) += v;
          G.noalias() = Wk * Ai * Xk;
        } else {
          G.setZero();
          for (const auto& [a, bb, v] : ei) G.noalias() += v * Wk.col(a) * Xk.row(bb);
        }
        const int i = list[ii].row;
        for (std::size_t jj = ii; jj < list.size(); ++jj) {
          double s = 0.0;
          for (const auto& [cc, d, v] : list[jj].entries) s += v * G(d, cc);
          const int j = list[jj].row;
          M(i, j) += s;
          if (i != j) M(j, i) += s;
        }
      }
    }
    return M;
  }
};

struct Factor {
  Eigen::LLT<MatrixXd> llt;
  bool ok = false;
};

Factor factor_spd(const MatrixXd& M, double floor) {
  Factor f;
  if (M.rows() == 0) {
    f.ok = true;
    return f;
  }
  if (!M.allFinite()) return f;
  f.llt.compute(M);
  if (f.llt.info() == Eigen::Success) {
    f.ok = true;
    return f;
  }
  const double scale = std::max(M.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (double delta = floor; delta <= 1e-2; delta *= 100.0) {
    MatrixXd R = M;
    R.diagonal().array() += delta * scale;
    f.llt.compute(R);
    if (f.llt.info() == Eigen::Success) {
      f.ok = true;
      return f;
    }
  }
  return f;
}

/// Largest alpha with X + alpha dX PSD (infinity if unbounded).
double max_step(const MatrixXd& X, const MatrixXd& dX) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd Linv_dX = llt.matrixL().solve(dX);
  MatrixXd Q = llt.matrixL().solve(Linv_dX.transpose());
  Q = 0.5 * (Q + Q.transpose());
  double lmin = min_eigenvalue(Q);
  return lmin < 0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double max_step(const Blocks& X, const Blocks& dX) {
  double a = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < X.size(); ++k) a = std::min(a, max_step(X[k], dX[k]));
  return a;
}

struct KernelResult {
  Blocks X;
  VectorXd u;
  VectorXd y;
  SdpStatus status = SdpStatus::numerical_failure;
  int iterations = 0;
  std::string message;
};

struct Metrics {
  double pobj, dobj, pinf, dinf, gap, mu;
};

KernelResult solve_kernel(const Kernel& K, const SolverSettings& s) {
  const int m = K.m();
  const int p = K.p();
  int n_total = 0;
  for (int n : K.sizes) n_total += n;

  const double norm_b = K.b.norm();
  const double norm_c = K.c.norm();
  const double norm_C = frobenius(K.C);

  // Starting point scaled to the data.
  Blocks X, Z;
  for (std::size_t k = 0; k < K.sizes.size(); ++k) {
    const double n = K.sizes[k];
    double xi = std::max(10.0, std::sqrt(n));
    double eta = std::max({10.0, std::sqrt(n), K.C[k].norm()});
    for (const auto& ex : K.by_block[k]) {
      double na = 0.0;
      for (const auto& [a, bb, v] : ex.entries) na += v * v;
      na = std::sqrt(na);
      xi = std::max(xi, n * (1.0 + std::abs(K.b[ex.row])) / (1.0 + na));
      eta = std::max(eta, na);
    }
    X.push_back(xi * MatrixXd::Identity(K.sizes[k], K.sizes[k]));
    Z.push_back(eta * MatrixXd::Identity(K.sizes[k], K.sizes[k]));
  }
  VectorXd u = VectorXd::Zero(p);
  VectorXd y = VectorXd::Zero(m);

  MatrixXd Q1, Q2, R;
  if (p > 0) {
    Eigen::HouseholderQR<MatrixXd> qr(K.B);
    MatrixXd Q = qr.householderQ();
    Q1 = Q.leftCols(p);
    Q2 = Q.rightCols(m - p);
    R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  }

  KernelResult out;
  int stalled = 0;

  // Once the tolerances are met, up to two extra iterations are kept while they lower the worst
  // tolerance-normalized metric.
  struct Snapshot {
    Blocks X, Z;
    VectorXd u, y;
    Metrics mt;
    int it;
  };
  std::optional<Snapshot> best;
  std::optional<Snapshot> best_any;  // lowest score seen, returned when the iteration fails
  int polish = 0;

  auto metrics = [&](const VectorXd& rp, const Blocks& Rd, const VectorXd& rc) {
    Metrics mt{};
    mt.pobj = inner(K.C, X) + K.c.dot(u);
    mt.dobj = K.b.dot(y);
    mt.pinf = rp.norm() / (1.0 + norm_b);
    mt.dinf = (frobenius(Rd) + rc.norm()) / (1.0 + norm_c + norm_C);
    mt.gap = std::abs(mt.pobj - mt.dobj) / (1.0 + std::abs(mt.pobj) + std::abs(mt.dobj));
    mt.mu = n_total > 0 ? inner(X, Z) / n_total : 0.0;
    return mt;
  };

  for (int it = 0;; ++it) {
    VectorXd rp = K.b - K.apply(X) - K.B * u;
    Blocks Aty = K.adjoint(y);
    Blocks Rd(K.sizes.size());
    for (std::size_t k = 0; k < K.sizes.size(); ++k) Rd[k] = K.C[k] - Aty[k] - Z[k];
    VectorXd rc = K.c - K.B.transpose() * y;
    Metrics mt = metrics(rp, Rd, rc);
    out.iterations = it;

    if (s.verbose) {
      std::fprintf(stderr, "%3d pobj %+.10e dobj %+.10e pinf %.2e dinf %.2e gap %.2e mu %.2e\n", it, mt.pobj, mt.dobj,
                   mt.pinf, mt.dinf, mt.gap, mt.mu);
    }
    bool finite = std::isfinite(mt.pobj) && std::isfinite(mt.dobj) && std::isfinite(mt.mu);
    if (!finite) {
      out.status = SdpStatus::numerical_failure;
      out.message = "non-finite iterate";
      break;
    }
    auto score = [&](const Metrics& q) { return std::max({q.pinf / s.feas_tol, q.dinf / s.feas_tol, q.gap / s.gap_tol}); };
    if (!best_any || score(mt) < score(best_any->mt)) best_any = Snapshot{X, Z, u, y, mt, it};
    if (best && !(score(mt) < score(best->mt))) {
      out.status = SdpStatus::optimal;
      break;
    }
    if (mt.pinf <= s.feas_tol && mt.dinf <= s.feas_tol && mt.gap <= s.gap_tol) {
      best = Snapshot{X, Z, u, y, mt, it};
      if (polish++ >= 2) {
        out.status = SdpStatus::optimal;
        break;
      }
    }
    // Divergence heuristics.
    double ynorm = y.lpNorm<Eigen::Infinity>();
    if (ynorm > 1e8 && mt.dobj > 0) {
      double lmax = 0.0;
      for (const auto& a : Aty) lmax = std::max(lmax, -min_eigenvalue(-a));
      double ratio = ((K.B.transpose() * y).norm() + std::max(0.0, lmax)) / mt.dobj;
      if (ratio < 1e-6) {
        out.status = SdpStatus::primal_infeasible;
        out.message = "dual iterates diverge along an infeasibility ray";
        break;
      }
    }
    double xnorm = std::max(frobenius(X), u.lpNorm<Eigen::Infinity>());
    if (xnorm > 1e8 && mt.pobj < 0) {
      double ratio = (K.b - rp).norm() / (-mt.pobj);
      if (ratio < 1e-6) {
        out.status = SdpStatus::dual_infeasible;
        out.message = "primal iterates diverge along an improving ray";
        break;
      }
    }
    if (best_any && it - best_any->it > 30) {
      out.status = SdpStatus::iteration_limit;
      out.message = "no progress in 30 iterations";
      break;
    }
    if (it >= s.max_iterations) {
      out.status = SdpStatus::iteration_limit;
      out.message = "iteration limit";
      break;
    }

    // W = Z^{-1}
    Blocks W(K.sizes.size());
    bool ok = true;
    for (std::size_t k = 0; k < K.sizes.size(); ++k) {
      Eigen::LLT<MatrixXd> llt(Z[k]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      W[k] = llt.solve(MatrixXd::Identity(K.sizes[k], K.sizes[k]));
      W[k] = 0.5 * (W[k] + W[k].transpose());
    }
    if (!ok) {
      out.status = SdpStatus::numerical_failure;
      out.message = "dual slack lost definiteness";
      break;
    }

    // Null-space form of the Newton system: dy = Q1 R^{-T} rc + Q2 dz, so only Q2^T M Q2 is factored.
    MatrixXd M = K.schur(X, W);
    Factor fM = factor_spd(p > 0 ? MatrixXd(Q2.transpose() * M * Q2) : M, s.regularization_floor);
    if (!fM.ok) {
      out.status = SdpStatus::numerical_failure;
      out.message = "Schur complement factorization failed";
      break;
    }

    struct Direction {
      Blocks dX, dZ;
      VectorXd du, dy;
    };
    auto direction = [&](double target, const Blocks* corrX, const Blocks* corrZ) {
      Blocks Rcomp(K.sizes.size());
      for (std::size_t k = 0; k < K.sizes.size(); ++k) {
        MatrixXd T = X[k] * Rd[k];
        if (corrX) T.noalias() += (*corrX)[k] * (*corrZ)[k];
        Rcomp[k] = target * W[k] - X[k] - T * W[k];
      }
      VectorXd h = rp - K.apply(Rcomp);
      Direction d;
      auto solve = [&](const VectorXd& hh, const VectorXd& rr, VectorXd& dy, VectorXd& du) {
        if (p > 0) {
          VectorXd dy_p = Q1 * R.transpose().triangularView<Eigen::Lower>().solve(rr);
          VectorXd dz = Q2.cols() > 0 ? VectorXd(fM.llt.solve(Q2.transpose() * (hh - M * dy_p))) : VectorXd::Zero(0);
          dy = dy_p + Q2 * dz;
          du = R.triangularView<Eigen::Upper>().solve(Q1.transpose() * (hh - M * dy));
        } else {
          dy = fM.llt.solve(hh);
          du = VectorXd::Zero(0);
        }
      };
      solve(h, rc, d.dy, d.du);
      // One step of iterative refinement against the unregularized system.
      {
        VectorXd eh = h - M * d.dy - (p > 0 ? VectorXd(K.B * d.du) : VectorXd::Zero(m));
        VectorXd er = p > 0 ? VectorXd(rc - K.B.transpose() * d.dy) : VectorXd::Zero(0);
        VectorXd cy, cu;
        solve(eh, er, cy, cu);
        d.dy += cy;
        if (p > 0) d.du += cu;
      }
      Blocks Atdy = K.adjoint(d.dy);
      d.dX.resize(K.sizes.size());
      d.dZ.resize(K.sizes.size());
      for (std::size_t k = 0; k < K.sizes.size(); ++k) {
        d.dZ[k] = Rd[k] - Atdy[k];
        MatrixXd dX = Rcomp[k] + X[k] * Atdy[k] * W[k];
        d.dX[k] = 0.5 * (dX + dX.transpose());
      }
      return d;
    };

    Direction pred = direction(0.0, nullptr, nullptr);
    double ap = std::min(1.0, max_step(X, pred.dX));
    double ad = std::min(1.0, max_step(Z, pred.dZ));
    double mu_aff = 0.0;
    if (n_total > 0) {
      for (std::size_t k = 0; k < K.sizes.size(); ++k) {
        mu_aff += (X[k] + ap * pred.dX[k]).cwiseProduct(Z[k] + ad * pred.dZ[k]).sum();
      }
      mu_aff /= n_total;
    }
    double sigma = mt.mu > 0 ? std::pow(std::clamp(mu_aff / mt.mu, 0.0, 1.0), 3) : 0.0;
    Direction corr = direction(sigma * mt.mu, &pred.dX, &pred.dZ);

    double ap2 = std::min(1.0, s.step_fraction * max_step(X, corr.dX));
    double ad2 = std::min(1.0, s.step_fraction * max_step(Z, corr.dZ));
    if (!std::isfinite(ap2) || !std::isfinite(ad2)) {
      out.status = SdpStatus::numerical_failure;
      out.message = "non-finite step";
      break;
    }
    for (std::size_t k = 0; k < K.sizes.size(); ++k) {
      X[k] += ap2 * corr.dX[k];
      Z[k] += ad2 * corr.dZ[k];
    }
    if (p > 0) u += ap2 * corr.du;
    y += ad2 * corr.dy;

    if (ap2 < 1e-8 && ad2 < 1e-8) {
      if (++stalled >= 3) {
        out.status = SdpStatus::numerical_failure;
        out.message = "step lengths stalled";
        out.iterations = it + 1;
        break;
      }
    } else {
      stalled = 0;
    }
  }
  if (best) {
    X = std::move(best->X);
    u = std::move(best->u);
    y = std::move(best->y);
    out.iterations = best->it;
    out.status = SdpStatus::optimal;
    out.message.clear();
  } else if (best_any && out.status != SdpStatus::primal_infeasible && out.status != SdpStatus::dual_infeasible) {
    X = std::move(best_any->X);
    u = std::move(best_any->u);
    y = std::move(best_any->y);
  }
  out.X = std::move(X);
  out.u = std::move(u);
  out.y = std::move(y);
  return out;
}

MatrixXd dense_free_matrix(const SdpProblem& p, const std::vector<int>& rows) {
  MatrixXd B = MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), p.num_free);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& f : p.rows[static_cast<std::size_t>(rows[r])].free_entries) {
      B(static_cast<Eigen::Index>(r), f.index) += f.value;
    }
  }
  return B;
}

}  // namespace

ResidualReport check_residuals(const SdpProblem& problem, const SdpSolution& solution,
                               const SolverSettings& settings) {
  ResidualReport r;
  const auto m = static_cast<Eigen::Index>(problem.rows.size());
  Blocks C = dense_objective(problem);
  VectorXd c = free_objective(problem);
  Blocks X = solution.primal_blocks;
  if (X.size() != problem.block_sizes.size()) X = zero_blocks(problem.block_sizes);
  VectorXd u = solution.free_values.size() == problem.num_free ? solution.free_values : VectorXd::Zero(problem.num_free);
  VectorXd y = solution.dual_vector.size() == m ? solution.dual_vector : VectorXd::Zero(m);

  VectorXd b(m), res(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = problem.rows[static_cast<std::size_t>(i)];
    b[i] = row.rhs;
    double lhs = apply_row(row.matrix_entries, X);
    for (const auto& f : row.free_entries) lhs += f.value * u[f.index];
    res[i] = row.rhs - lhs;
  }
  Blocks S = C;
  VectorXd rc = c;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = problem.rows[static_cast<std::size_t>(i)];
    for (const auto& e : row.matrix_entries) add_entry(S[static_cast<std::size_t>(e.block)], e, -y[i]);
    for (const auto& f : row.free_entries) rc[f.index] -= f.value * y[i];
  }
  double dual_psd_violation = 0.0;
  for (const auto& blk : S) dual_psd_violation = std::max(dual_psd_violation, -min_eigenvalue(blk));

  r.primal_objective = inner(C, X) + c.dot(u);
  r.dual_objective = b.dot(y);
  r.pinf = res.norm() / (1.0 + b.norm());
  r.dinf = (rc.norm() + std::max(0.0, dual_psd_violation)) / (1.0 + c.norm() + frobenius(C));
  r.gap = std::abs(r.primal_objective - r.dual_objective) /
          (1.0 + std::abs(r.primal_objective) + std::abs(r.dual_objective));
  r.min_primal_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& blk : X) r.min_primal_eigenvalue = std::min(r.min_primal_eigenvalue, min_eigenvalue(blk));
  if (X.empty()) r.min_primal_eigenvalue = 0.0;

  r.pinf_flag = r.pinf - solution.pinf > 10.0 * settings.feas_tol;
  r.dinf_flag = r.dinf - solution.dinf > 10.0 * settings.feas_tol;
  r.gap_flag = r.gap - solution.gap > 10.0 * settings.gap_tol;
  r.psd_flag = r.min_primal_eigenvalue < -settings.feas_tol;
  return r;
}

SdpSolution solve_sdp(const SdpProblem& problem, const SolverSettings& settings) {
  auto t0 = std::chrono::steady_clock::now();
  problem.validate();
  settings.validate();

  SdpSolution sol;
  const int p = problem.num_free;
  const auto m_total = static_cast<Eigen::Index>(problem.rows.size());
  sol.primal_blocks = zero_blocks(problem.block_sizes);
  sol.free_values = VectorXd::Zero(p);
  sol.dual_vector = VectorXd::Zero(m_total);
  const VectorXd c_full = free_objective(problem);

  auto finish = [&](SdpStatus kernel_status) {
    ResidualReport rep = check_residuals(problem, sol, settings);
    sol.primal_objective = rep.primal_objective;
    sol.dual_objective = rep.dual_objective;
    sol.pinf = rep.pinf;
    sol.dinf = rep.dinf;
    sol.gap = rep.gap;
    const bool tight = sol.pinf <= settings.feas_tol && sol.dinf <= settings.feas_tol && sol.gap <= settings.gap_tol;
    const bool loose = sol.pinf <= 1e3 * settings.feas_tol && sol.dinf <= 1e3 * settings.feas_tol &&
                       sol.gap <= 1e3 * settings.gap_tol;
    if (kernel_status == SdpStatus::primal_infeasible || kernel_status == SdpStatus::dual_infeasible) {
      sol.status = kernel_status;
    } else if (tight) {
      sol.status = SdpStatus::optimal;
    } else if (loose) {
      sol.status = SdpStatus::near_optimal;
    } else {
      sol.status = kernel_status == SdpStatus::optimal ? SdpStatus::numerical_failure : kernel_status;
    }
    sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  };

  // Split rows into those touching a PSD block and purely linear ones.
  std::vector<int> lin_rows, psd_rows;
  for (int i = 0; i < static_cast<int>(m_total); ++i) {
    (problem.rows[static_cast<std::size_t>(i)].matrix_entries.empty() ? lin_rows : psd_rows).push_back(i);
  }

  // u = u0 + N w eliminates the linear rows.
  VectorXd u0 = VectorXd::Zero(p);
  MatrixXd N = MatrixXd::Identity(p, p);
  MatrixXd BL = dense_free_matrix(problem, lin_rows);
  VectorXd bL(static_cast<Eigen::Index>(lin_rows.size()));
  for (std::size_t r = 0; r < lin_rows.size(); ++r) {
    bL[static_cast<Eigen::Index>(r)] = problem.rows[static_cast<std::size_t>(lin_rows[r])].rhs;
  }
  if (!lin_rows.empty()) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(BL);
    qr.setThreshold(1e-12);
    u0 = qr.solve(bL);
    if ((BL * u0 - bL).norm() > 1e-9 * (1.0 + bL.norm())) {
      sol.message = "linear equality rows are inconsistent";
      return finish(SdpStatus::primal_infeasible);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qrt(BL.transpose());
    qrt.setThreshold(1e-12);
    const auto rank = qrt.rank();
    MatrixXd Q = qrt.householderQ();
    N = Q.rightCols(p - rank);
  }

  MatrixXd BR = dense_free_matrix(problem, psd_rows);
  MatrixXd Bp = BR * N;
  VectorXd cp = N.transpose() * c_full;

  // Keep an independent subset of the columns of B' = B_R N.
  std::vector<Eigen::Index> keep;
  if (Bp.cols() > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Bp);
    qr.setThreshold(1e-12);
    const auto r = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = 0; j < r; ++j) keep.push_back(perm[j]);
    if (r < Bp.cols()) {
      MatrixXd R11 = qr.matrixR().topLeftCorner(r, r).template triangularView<Eigen::Upper>();
      MatrixXd R12 = qr.matrixR().topRightCorner(r, Bp.cols() - r);
      VectorXd c1(r), c2(Bp.cols() - r);
      for (Eigen::Index j = 0; j < r; ++j) c1[j] = cp[perm[j]];
      for (Eigen::Index j = r; j < Bp.cols(); ++j) c2[j - r] = cp[perm[j]];
      VectorXd eta = R11.transpose().triangularView<Eigen::Lower>().solve(c1);
      VectorXd v = c2 - R12.transpose() * eta;
      if (v.lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + cp.lpNorm<Eigen::Infinity>())) {
        sol.message = "objective improves along a direction free of constraints";
        return finish(SdpStatus::dual_infeasible);
      }
    }
    std::sort(keep.begin(), keep.end());
  }

  Kernel K;
  K.sizes = problem.block_sizes;
  for (int i : psd_rows) K.rows.push_back(problem.rows[static_cast<std::size_t>(i)].matrix_entries);
  K.B.resize(static_cast<Eigen::Index>(psd_rows.size()), static_cast<Eigen::Index>(keep.size()));
  K.c.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    K.B.col(static_cast<Eigen::Index>(j)) = Bp.col(keep[j]);
    K.c[static_cast<Eigen::Index>(j)] = cp[keep[j]];
  }
  K.b.resize(static_cast<Eigen::Index>(psd_rows.size()));
  for (std::size_t r = 0; r < psd_rows.size(); ++r) {
    K.b[static_cast<Eigen::Index>(r)] = problem.rows[static_cast<std::size_t>(psd_rows[r])].rhs;
  }
  if (p > 0) K.b -= BR * u0;
  K.C = dense_objective(problem);
  K.build_index();

  if (K.m() == 0) {
    // No coupling constraints: optimal at X = 0 iff C is PSD and no free direction remains.
    double lmin = 0.0;
    for (const auto& blk : K.C) lmin = std::min(lmin, min_eigenvalue(blk));
    sol.free_values = u0;
    if (lmin < -settings.feas_tol || K.c.size() > 0) {
      sol.message = "objective unbounded below";
      return finish(SdpStatus::dual_infeasible);
    }
    sol.iterations = 0;
    if (!lin_rows.empty()) {
      VectorXd yL = BL.transpose().colPivHouseholderQr().solve(c_full);
      for (std::size_t r = 0; r < lin_rows.size(); ++r) sol.dual_vector[lin_rows[r]] = yL[static_cast<Eigen::Index>(r)];
    }
    return finish(SdpStatus::optimal);
  }

  KernelResult kr = solve_kernel(K, settings);
  sol.iterations = kr.iterations;
  sol.message = kr.message;
  sol.primal_blocks = kr.X;
  VectorXd w = VectorXd::Zero(N.cols());
  for (std::size_t j = 0; j < keep.size(); ++j) w[keep[j]] = kr.u[static_cast<Eigen::Index>(j)];
  sol.free_values = u0 + N * w;
  for (std::size_t r = 0; r < psd_rows.size(); ++r) sol.dual_vector[psd_rows[r]] = kr.y[static_cast<Eigen::Index>(r)];
  if (!lin_rows.empty()) {
    VectorXd rhs = c_full - BR.transpose() * kr.y;
    VectorXd yL = BL.transpose().colPivHouseholderQr().solve(rhs);
    for (std::size_t r = 0; r < lin_rows.size(); ++r) sol.dual_vector[lin_rows[r]] = yL[static_cast<Eigen::Index>(r)];
  }
  return finish(kr.status);
}

// ---------------------------------------------------------------------------------------------
// SDPA sparse format

namespace {

struct SdpaEntry {
  int mat, blk, i, j;
  double v;
  bool operator<(const SdpaEntry& o) const { return std::tie(mat, blk, i, j) < std::tie(o.mat, o.blk, o.i, o.j); }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void export_sdpa(const SdpProblem& problem, std::ostream& out) {
  problem.validate();
  const int nblocks_psd = static_cast<int>(problem.block_sizes.size());
  const int p = problem.num_free;
  const int lp_block = nblocks_psd + 1;

  std::map<std::tuple<int, int, int, int>, double> acc;
  auto put = [&](int mat, int blk, int i, int j, double v) { acc[{mat, blk, i, j}] += v; };

  for (const auto& e : problem.objective_matrix) put(0, e.block + 1, e.row + 1, e.col + 1, -e.value);
  for (int j = 0; j < p; ++j) {
    double cj = j < static_cast<int>(problem.objective_free.size()) ? problem.objective_free[static_cast<std::size_t>(j)] : 0.0;
    if (cj != 0.0) {
      put(0, lp_block, j + 1, j + 1, -cj);
      put(0, lp_block, p + j + 1, p + j + 1, cj);
    }
  }
  for (std::size_t r = 0; r < problem.rows.size(); ++r) {
    const int mat = static_cast<int>(r) + 1;
    for (const auto& e : problem.rows[r].matrix_entries) put(mat, e.block + 1, e.row + 1, e.col + 1, e.value);
    for (const auto& f : problem.rows[r].free_entries) {
      put(mat, lp_block, f.index + 1, f.index + 1, f.value);
      put(mat, lp_block, p + f.index + 1, p + f.index + 1, -f.value);
    }
  }

  out << problem.rows.size() << "\n";
  out << nblocks_psd + (p > 0 ? 1 : 0) << "\n";
  for (int k = 0; k < nblocks_psd; ++k) out << (k ? " " : "") << problem.block_sizes[static_cast<std::size_t>(k)];
  if (p > 0) out << (nblocks_psd ? " " : "") << -2 * p;
  out << "\n";
  for (std::size_t r = 0; r < problem.rows.size(); ++r) out << (r ? " " : "") << fmt(problem.rows[r].rhs);
  out << "\n";
  for (const auto& [key, v] : acc) {
    if (v == 0.0) continue;
    const auto& [mat, blk, i, j] = key;
    out << mat << " " << blk << " " << i << " " << j << " " << fmt(v) << "\n";
  }
  if (!out) throw std::runtime_error("export_sdpa: write failure");
}

std::string export_sdpa(const SdpProblem& problem) {
  std::ostringstream os;
  export_sdpa(problem, os);
  return os.str();
}

SdpProblem import_sdpa(std::istream& in) {
  // Drop comment lines, then treat the rest as a token stream with SDPA punctuation ignored.
  std::string line, body;
  bool header_done = false;
  while (std::getline(in, line)) {
    auto pos = line.find_first_not_of(" \t\r");
    if (!header_done && (pos == std::string::npos || line[pos] == '*' || line[pos] == '"')) continue;
    header_done = true;
    for (char& ch : line) {
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    }
    body += line;
    body += '\n';
  }
  std::istringstream ts(body);
  auto need = [&](auto& v, const char* what) {
    if (!(ts >> v)) throw std::runtime_error(std::string("import_sdpa: missing ") + what);
  };
  int m = 0, nb = 0;
  need(m, "constraint count");
  need(nb, "block count");
  if (m < 0 || nb < 0) throw std::runtime_error("import_sdpa: negative counts");
  std::vector<int> sizes(static_cast<std::size_t>(nb));
  for (auto& s : sizes) need(s, "block size");
  std::vector<double> c(static_cast<std::size_t>(m));
  for (auto& v : c) need(v, "objective vector");

  std::vector<SdpaEntry> entries;
  SdpaEntry e{};
  while (ts >> e.mat) {
    need(e.blk, "block index");
    need(e.i, "row index");
    need(e.j, "column index");
    need(e.v, "value");
    if (e.mat < 0 || e.mat > m || e.blk < 1 || e.blk > nb) throw std::runtime_error("import_sdpa: index out of range");
    const int sz = std::abs(sizes[static_cast<std::size_t>(e.blk - 1)]);
    if (e.i < 1 || e.j < 1 || e.i > sz || e.j > sz) throw std::runtime_error("import_sdpa: entry out of range");
    if (e.i > e.j) std::swap(e.i, e.j);
    entries.push_back(e);
  }

  // Decide how each diagonal (negative-size) block is represented.
  SdpProblem prob;
  std::vector<int> psd_index(static_cast<std::size_t>(nb), -1);  // first PSD block id for block k
  std::vector<int> free_offset(static_cast<std::size_t>(nb), -1);
  for (int k = 0; k < nb; ++k) {
    const int s = sizes[static_cast<std::size_t>(k)];
    if (s > 0) {
      psd_index[static_cast<std::size_t>(k)] = static_cast<int>(prob.block_sizes.size());
      prob.block_sizes.push_back(s);
      continue;
    }
    const int q = -s;
    bool paired = q % 2 == 0;
    if (paired) {
      const int half = q / 2;
      std::map<std::pair<int, int>, double> vals;
      for (const auto& en : entries) {
        if (en.blk != k + 1) continue;
        if (en.i != en.j) {
          paired = false;
          break;
        }
        vals[{en.mat, en.i}] += en.v;
      }
      if (paired) {
        for (const auto& [key, v] : vals) {
          const int idx = key.second;
          const int partner = idx <= half ? idx + half : idx - half;
          auto it = vals.find({key.first, partner});
          double pv = it == vals.end() ? 0.0 : it->second;
          if (pv != -v) {
            paired = false;
            break;
          }
        }
      }
    }
    if (paired) {
      free_offset[static_cast<std::size_t>(k)] = prob.num_free;
      prob.num_free += q / 2;
    } else {
      psd_index[static_cast<std::size_t>(k)] = static_cast<int>(prob.block_sizes.size());
      for (int t = 0; t < q; ++t) prob.block_sizes.push_back(1);
    }
  }

  prob.rows.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) prob.rows[static_cast<std::size_t>(i)].rhs = c[static_cast<std::size_t>(i)];
  prob.objective_free.assign(static_cast<std::size_t>(prob.num_free), 0.0);

  std::sort(entries.begin(), entries.end());
  for (const auto& en : entries) {
    const auto k = static_cast<std::size_t>(en.blk - 1);
    const int s = sizes[k];
    if (free_offset[k] >= 0) {
      const int half = -s / 2;
      if (en.i > half) continue;  // mirrored half
      const int idx = free_offset[k] + en.i - 1;
      if (en.mat == 0) {
        prob.objective_free[static_cast<std::size_t>(idx)] += -en.v;
      } else {
        prob.rows[static_cast<std::size_t>(en.mat - 1)].free_entries.push_back({idx, en.v});
      }
      continue;
    }
    MatrixEntry me;
    if (s > 0) {
      me = {psd_index[k], en.i - 1, en.j - 1, en.v};
    } else {
      if (en.i != en.j) throw std::runtime_error("import_sdpa: off-diagonal entry in diagonal block");
      me = {psd_index[k] + en.i - 1, 0, 0, en.v};
    }
    if (en.mat == 0) {
      me.value = -me.value;
      prob.objective_matrix.push_back(me);
    } else {
      prob.rows[static_cast<std::size_t>(en.mat - 1)].matrix_entries.push_back(me);
    }
  }
  prob.validate();
  return prob;
}

SdpProblem import_sdpa_string(const std::string& text) {
  std::istringstream is(text);
  return import_sdpa(is);
}

}  // namespace sosupo
