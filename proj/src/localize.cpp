#include "sosupo/localize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sosupo/errors.hpp"

namespace sosupo {

void IndicatorPoly::finalize() {
  compiled_ = CompiledPolynomial(P);
  degenerate = P.max_abs_coefficient() <= 1e-10;
}

IndicatorPoly build_indicator_poly(double raw_lambda, const Polynomial& V, const std::vector<Polynomial>& f,
                                   const Polynomial& phi, BoundSense sense) {
  const int n = static_cast<int>(f.size());
  if (V.dimension() != n || phi.dimension() != n) throw DimensionMismatch("build_indicator_poly: dimension");
  IndicatorPoly ip;
  ip.lambda = raw_lambda;
  ip.sense = sense;
  Polynomial signed_phi = sense == BoundSense::lower_bound_of_min ? -phi : phi;
  ip.P = Polynomial::constant(n, raw_lambda) - lie_derivative(f, V) - signed_phi;
  ip.finalize();
  return ip;
}

IndicatorPoly build_indicator_poly(const BoundCertificate& cert, const std::vector<Polynomial>& f, const Polynomial& phi) {
  return build_indicator_poly(cert.raw_lambda, cert.V, f, phi, cert.sense);
}

void SamplerConfig::validate(int dimension) const {
  if (static_cast<int>(start_box.size()) != dimension) throw ConfigError("sampler: start box dimension mismatch");
  for (const auto& [lo, hi] : start_box) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("sampler: empty start box interval");
  }
  if (n_starts < 0) throw ConfigError("sampler: negative start count");
  if (!(step_tol > 0) || !(grad_tol > 0)) throw ConfigError("sampler: tolerances must be positive");
  for (double g : grad_tol_ladder) {
    if (!(g > 0)) throw ConfigError("sampler: ladder tolerances must be positive");
  }
  if (max_iters < 1) throw ConfigError("sampler: max_iters must be positive");
  if (beta && *beta < 0) throw ConfigError("sampler: beta must be nonnegative");
}

std::string to_string(BfgsStatus status) {
  switch (status) {
    case BfgsStatus::step_tolerance: return "step_tolerance";
    case BfgsStatus::gradient_tolerance: return "gradient_tolerance";
    case BfgsStatus::iteration_limit: return "iteration_limit";
    case BfgsStatus::non_finite: return "non_finite";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Objective {
  const IndicatorPoly& P;
  mutable long evaluations = 0;

  double operator()(const VectorXd& x, VectorXd& g) const {
    ++evaluations;
    g.resize(x.size());
    return P.value_and_gradient(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                                std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
  }
};

bool finite(double v, const VectorXd& g) { return std::isfinite(v) && g.allFinite(); }

struct LineSearchResult {
  double alpha = 0.0;
  double value = 0.0;
  VectorXd x, g;
  bool ok = false;
  bool non_finite = false;
};

// Strong Wolfe line search (Nocedal & Wright, algorithms 3.5 and 3.6).
LineSearchResult strong_wolfe(const Objective& obj, const VectorXd& x, double f0, const VectorXd& g0, const VectorXd& p,
                              double alpha_init) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  const double d0 = g0.dot(p);
  LineSearchResult best;
  best.alpha = 0.0;
  best.value = f0;

  auto eval = [&](double a, LineSearchResult& out) {
    out.alpha = a;
    out.x = x + a * p;
    out.value = obj(out.x, out.g);
    out.non_finite = !finite(out.value, out.g);
    return out.g.dot(p);
  };

  auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi) {
    LineSearchResult trial;
    for (int k = 0; k < 40; ++k) {
      double a;
      // Cubic interpolation, safeguarded into the middle 80% of the bracket.
      const double d1 = d_lo + d_hi - 3 * (f_lo - f_hi) / (lo - hi);
      const double disc = d1 * d1 - d_lo * d_hi;
      const double lo_b = std::min(lo, hi), hi_b = std::max(lo, hi), w = hi_b - lo_b;
      if (disc >= 0) {
        const double d2 = std::copysign(std::sqrt(disc), hi - lo);
        a = hi - (hi - lo) * (d_hi + d2 - d1) / (d_hi - d_lo + 2 * d2);
      } else {
        a = 0.5 * (lo + hi);
      }
      if (!std::isfinite(a) || a < lo_b + 0.1 * w || a > hi_b - 0.1 * w) a = 0.5 * (lo + hi);
      double da = eval(a, trial);
      if (trial.non_finite) return trial;
      if (trial.value > f0 + c1 * a * d0 || trial.value >= f_lo) {
        hi = a;
        f_hi = trial.value;
        d_hi = da;
      } else {
        if (std::abs(da) <= -c2 * d0) {
          trial.ok = true;
          return trial;
        }
        if (da * (hi - lo) >= 0) {
          hi = lo;
          f_hi = f_lo;
          d_hi = d_lo;
        }
        lo = a;
        f_lo = trial.value;
        d_lo = da;
        best = trial;
      }
      if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    // Accept any sufficient-decrease point found while zooming.
    if (best.alpha > 0 && best.value < f0) best.ok = true;
    return best;
  };

  double a_prev = 0.0, f_prev = f0, d_prev = d0;
  double a = alpha_init;
  LineSearchResult cur;
  for (int i = 0; i < 60; ++i) {
    double da = eval(a, cur);
    if (cur.non_finite) return cur;
    if (cur.value > f0 + c1 * a * d0 || (i > 0 && cur.value >= f_prev)) return zoom(a_prev, f_prev, d_prev, a, cur.value, da);
    if (std::abs(da) <= -c2 * d0) {
      cur.ok = true;
      return cur;
    }
    if (da >= 0) return zoom(a, cur.value, da, a_prev, f_prev, d_prev);
    best = cur;
    a_prev = a;
    f_prev = cur.value;
    d_prev = da;
    a *= 2.0;
  }
  best.ok = best.value < f0;
  return best;
}

Iterate make_iterate(const VectorXd& x, double v, const VectorXd& g) {
  return {State(x.data(), x.data() + x.size()), v, g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0};
}

}  // namespace

BfgsResult bfgs_minimize(const IndicatorPoly& P, const State& x0, const SamplerConfig& cfg) {
  return bfgs_minimize(P, x0, cfg, cfg.grad_tol);
}

BfgsResult bfgs_minimize(const IndicatorPoly& P, const State& x0, const SamplerConfig& cfg, double grad_tol) {
  const int n = static_cast<int>(x0.size());
  if (n != P.P.dimension()) throw DimensionMismatch("bfgs_minimize: start dimension");
  for (double v : x0) {
    if (!std::isfinite(v)) throw std::invalid_argument("bfgs_minimize: start must be finite");
  }
  const bool trails = cfg.keep == KeepPolicy::full_trails;
  Objective obj{P};
  BfgsResult res;
  VectorXd x = Eigen::Map<const VectorXd>(x0.data(), n);
  VectorXd g;
  double f = obj(x, g);
  if (trails) res.trail.push_back(make_iterate(x, f, g));
  if (!finite(f, g)) {
    res.status = BfgsStatus::non_finite;
    if (!trails) res.trail.push_back(make_iterate(x, f, g));
    return res;
  }
  MatrixXd H = MatrixXd::Identity(n, n);
  bool scaled = false;
  res.status = BfgsStatus::iteration_limit;
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (n == 0 || g.lpNorm<Eigen::Infinity>() < grad_tol) {
      res.status = BfgsStatus::gradient_tolerance;
      break;
    }
    VectorXd p = -H * g;
    if (g.dot(p) >= 0) {
      H.setIdentity();
      p = -g;
    }
    const double alpha0 = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(g.norm(), 1e-300));
    LineSearchResult ls = strong_wolfe(obj, x, f, g, p, alpha0);
    if (ls.non_finite) {
      res.status = BfgsStatus::non_finite;
      break;
    }
    if (!ls.ok) {
      res.status = BfgsStatus::step_tolerance;
      break;
    }
    VectorXd s = ls.x - x;
    VectorXd y = ls.g - g;
    x = ls.x;
    f = ls.value;
    g = ls.g;
    ++res.iterations;
    if (trails) res.trail.push_back(make_iterate(x, f, g));
    const double ys = y.dot(s);
    if (ys > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H *= ys / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / ys;
      VectorXd Hy = H * y;
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      H += (rho * rho * y.dot(Hy) + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    if (s.norm() / std::max(1.0, x.norm()) < cfg.step_tol) {
      res.status = g.lpNorm<Eigen::Infinity>() < grad_tol ? BfgsStatus::gradient_tolerance : BfgsStatus::step_tolerance;
      break;
    }
  }
  if (!trails) res.trail.push_back(make_iterate(x, f, g));
  return res;
}

std::vector<ScreenedStart> screen_starts(const IndicatorPoly& P, const std::vector<State>& candidates, double beta) {
  if (!(beta >= 0)) throw std::invalid_argument("screen_starts: beta must be nonnegative");
  std::vector<ScreenedStart> out;
  out.reserve(candidates.size());
  for (const auto& a : candidates) {
    double w = beta == 0 ? 1.0 : std::exp(-beta * P.value(a));
    out.push_back({a, w});
  }
  return out;
}

double default_epsilon(double lambda, double reference_average) {
  return std::max(1e-6, 10.0 * std::abs(lambda - reference_average));
}

namespace {

bool in_set(const std::optional<SemialgebraicSet>& omega, const State& a) {
  if (!omega) return true;
  for (const auto& g : omega->constraints) {
    if (g.evaluate(a) < 0) return false;
  }
  return true;
}

struct RunOutput {
  std::vector<CloudPoint> points;
  long iterates = 0;
  double min_P = std::numeric_limits<double>::infinity();
  bool failed = false;
};

}  // namespace

PointCloud harvest(const IndicatorPoly& P, const SamplerConfig& cfg, double epsilon,
                   const std::optional<SemialgebraicSet>& omega) {
  const int n = P.P.dimension();
  cfg.validate(n);
  if (!(epsilon > 0)) throw std::invalid_argument("harvest: epsilon must be positive");
  if (omega && omega->dimension != n) throw DimensionMismatch("harvest: omega dimension");
  const std::vector<double> ladder = cfg.grad_tol_ladder.empty() ? std::vector<double>{cfg.grad_tol} : cfg.grad_tol_ladder;

  std::vector<RunOutput> runs(static_cast<std::size_t>(cfg.n_starts));
  auto do_run = [&](int r) {
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.rng_seed), static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto draw = [&] {
      State a(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const auto& [lo, hi] = cfg.start_box[static_cast<std::size_t>(i)];
        a[static_cast<std::size_t>(i)] = lo + (hi - lo) * U(rng);
      }
      return a;
    };
    State x0 = draw();
    if (cfg.beta && *cfg.beta > 0) {
      // Rejection sampling with acceptance probability exp(-beta P).
      State best = x0;
      double best_w = -1.0;
      bool accepted = false;
      for (int k = 0; k < 1000 && !accepted; ++k) {
        State c = k == 0 ? x0 : draw();
        double w = std::exp(-*cfg.beta * P.value(c));
        if (w > best_w) {
          best_w = w;
          best = c;
        }
        if (U(rng) < w) {
          x0 = c;
          accepted = true;
        }
      }
      if (!accepted) x0 = best;
    }
    RunOutput& out = runs[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      BfgsResult br = bfgs_minimize(P, x0, cfg, ladder[k]);
      if (br.status == BfgsStatus::non_finite) out.failed = true;
      const int first_iter = cfg.keep == KeepPolicy::full_trails ? 0 : br.iterations;
      for (std::size_t j = 0; j < br.trail.size(); ++j) {
        const Iterate& itr = br.trail[j];
        ++out.iterates;
        if (!std::isfinite(itr.value)) continue;
        out.min_P = std::min(out.min_P, itr.value);
        if (itr.value <= epsilon) {
          out.points.push_back({itr.a, itr.value, r, first_iter + static_cast<int>(j), static_cast<int>(k), in_set(omega, itr.a)});
        }
      }
    }
  };

  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, std::max(1, cfg.n_starts));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int r = next++; r < cfg.n_starts; r = next++) {
      try {
        do_run(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  PointCloud cloud;
  cloud.dimension = n;
  cloud.epsilon = epsilon;
  cloud.stats.runs = cfg.n_starts;
  cloud.stats.degenerate = P.degenerate;
  double min_P = std::numeric_limits<double>::infinity();
  for (auto& run : runs) {
    cloud.stats.iterates += run.iterates;
    if (run.failed) ++cloud.stats.failed_runs;
    min_P = std::min(min_P, run.min_P);
    for (auto& p : run.points) {
      cloud.stats.max_accepted_P = cloud.points.empty() ? p.P : std::max(cloud.stats.max_accepted_P, p.P);
      cloud.points.push_back(std::move(p));
    }
  }
  cloud.stats.accepted = static_cast<long>(cloud.points.size());
  cloud.stats.min_P = std::isfinite(min_P) ? min_P : 0.0;
  std::ostringstream os;
  if (P.degenerate) {
    os << "indicator polynomial vanishes identically; every iterate is accepted";
  } else if (cloud.empty()) {
    os << "no iterate reached P <= " << epsilon << " (smallest P seen " << cloud.stats.min_P
       << "); try a larger epsilon or a higher-degree certificate";
  }
  cloud.warning = os.str();
  return cloud;
}

void PointCloud::write_csv(std::ostream& out) const {
  out << "run,iter,P";
  for (int i = 0; i < dimension; ++i) out << ",a" << (i + 1);
  out << "\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g", p.P);
    out << p.run << "," << p.iter << "," << buf;
    for (double v : p.a) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

void PointCloud::write_json(std::ostream& out) const {
  nlohmann::ordered_json j;
  j["dimension"] = dimension;
  j["epsilon"] = epsilon;
  j["stats"] = {{"runs", stats.runs},
                {"iterates", stats.iterates},
                {"accepted", stats.accepted},
                {"failed_runs", stats.failed_runs},
                {"min_P", stats.min_P},
                {"max_accepted_P", stats.max_accepted_P},
                {"degenerate", stats.degenerate}};
  if (!warning.empty()) j["warning"] = warning;
  auto pts = nlohmann::ordered_json::array();
  for (const auto& p : points) {
    pts.push_back({{"run", p.run}, {"iter", p.iter}, {"rung", p.rung}, {"P", p.P}, {"in_omega", p.in_omega}, {"a", p.a}});
  }
  j["points"] = std::move(pts);
  out << j.dump(1) << "\n";
}

PointCloud PointCloud::read_csv(std::istream& in) {
  PointCloud cloud;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("point cloud: missing header");
  {
    std::stringstream hs(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    if (cols.size() < 3 || cols[0] != "run" || cols[1] != "iter" || cols[2] != "P") {
      throw ParseError("point cloud: header must start with run,iter,P");
    }
    cloud.dimension = static_cast<int>(cols.size()) - 3;
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != cloud.dimension + 3) {
      throw ParseError("point cloud: wrong column count on line " + std::to_string(lineno));
    }
    CloudPoint p;
    try {
      p.run = std::stoi(cells[0]);
      p.iter = std::stoi(cells[1]);
      p.P = std::stod(cells[2]);
      for (int i = 0; i < cloud.dimension; ++i) p.a.push_back(std::stod(cells[static_cast<std::size_t>(3 + i)]));
    } catch (const std::exception&) {
      throw ParseError("point cloud: bad number on line " + std::to_string(lineno));
    }
    cloud.epsilon = std::max(cloud.epsilon, p.P);
    cloud.points.push_back(std::move(p));
  }
  cloud.stats.accepted = static_cast<long>(cloud.points.size());
  return cloud;
}

}  // namespace sosupo
