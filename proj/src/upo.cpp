#include "sosupo/upo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "sosupo/errors.hpp"

namespace sosupo {

namespace {

double dist(const State& a, const State& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double norm(const State& a) { return std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0)); }

template <class F>
double golden_min(F&& g, double lo, double hi, double* best_value = nullptr, int iters = 80) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
  double gc = g(c), gd = g(d);
  for (int k = 0; k < iters && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++k) {
    if (gc < gd) {
      hi = d;
      d = c;
      gd = gc;
      c = hi - r * (hi - lo);
      gc = g(c);
    } else {
      lo = c;
      c = d;
      gc = gd;
      d = lo + r * (hi - lo);
      gd = g(d);
    }
  }
  double t = gc < gd ? c : d;
  if (best_value) *best_value = std::min(gc, gd);
  return t;
}

State rk4_step(const VectorField& field, const State& x, double h) {
  const std::size_t n = x.size();
  State k1 = field(x), y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k1[i];
  State k2 = field(y);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k2[i];
  State k3 = field(y);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + h * k3[i];
  State k4 = field(y);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return y;
}

/// N uniform RK4 samples over one period.
void fill_samples(const VectorField& field, const State& a0, double T, int N, std::vector<State>& samples,
                  std::vector<State>& derivatives) {
  samples.clear();
  derivatives.clear();
  samples.reserve(static_cast<std::size_t>(N));
  derivatives.reserve(static_cast<std::size_t>(N));
  const double h = T / N;
  State x = a0;
  for (int k = 0; k < N; ++k) {
    samples.push_back(x);
    derivatives.push_back(field(x));
    if (k + 1 < N) x = rk4_step(field, x, h);
  }
}

}  // namespace

std::string to_string(OrbitStatus status) {
  switch (status) {
    case OrbitStatus::converged: return "converged";
    case OrbitStatus::no_convergence: return "no_convergence";
    case OrbitStatus::converged_to_equilibrium: return "converged_to_equilibrium";
  }
  return "unknown";
}

State PeriodicOrbit::at(double t) const {
  if (samples.empty() || !(T > 0)) throw std::logic_error("PeriodicOrbit::at: no samples");
  const int N = static_cast<int>(samples.size());
  const double h = T / N;
  double u = std::fmod(t, T);
  if (u < 0) u += T;
  int k = std::min(static_cast<int>(u / h), N - 1);
  const double s = (u - k * h) / h;
  const State& x0 = samples[static_cast<std::size_t>(k)];
  const State& x1 = samples[static_cast<std::size_t>((k + 1) % N)];
  const State& f0 = derivatives[static_cast<std::size_t>(k)];
  const State& f1 = derivatives[static_cast<std::size_t>((k + 1) % N)];
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  State out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i];
  return out;
}

double distance_to_orbit(const PeriodicOrbit& orbit, const State& a) {
  const int N = static_cast<int>(orbit.samples.size());
  if (N == 0) throw std::logic_error("distance_to_orbit: no samples");
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int k = 0; k < N; ++k) {
    double d = dist(orbit.samples[static_cast<std::size_t>(k)], a);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  const double h = orbit.T / N;
  double refined = bd;
  golden_min([&](double t) { return dist(orbit.at(t), a); }, (best - 1) * h, (best + 1) * h, &refined, 60);
  return std::min(bd, refined);
}

double closure_residual(const OdeSystem& system, const State& a0, double T, const IntegratorControl& control) {
  return dist(integrate_streaming(system, a0, T, control, nullptr), a0);
}

std::vector<OrbitGuess> recurrence_guesses(const OdeSystem& system, const std::vector<State>& starts, double horizon,
                                           double near_tol, const RecurrenceOptions& options) {
  if (!(horizon > 0)) throw std::invalid_argument("recurrence_guesses: horizon must be positive");
  if (!(near_tol > 0)) throw std::invalid_argument("recurrence_guesses: near_tol must be positive");
  std::vector<OrbitGuess> out;
  const std::size_t limit = options.max_starts == 0 ? starts.size() : std::min(starts.size(), options.max_starts);
  for (std::size_t s = 0; s < limit; ++s) {
    const State& a0 = starts[s];
    bool duplicate = false;
    for (const auto& g : out) duplicate = duplicate || dist(g.a0, a0) < options.dedupe_tol;
    if (duplicate) continue;
    Trajectory tr;
    try {
      tr = integrate(system, a0, horizon, options.control);
    } catch (const IntegrationError&) {
      continue;
    }
    std::vector<double> d(tr.times.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = dist(tr.states[k], a0);
    bool left = false;
    for (std::size_t k = 1; k + 1 < d.size(); ++k) {
      if (!left) {
        left = d[k] > 2 * near_tol;
        continue;
      }
      if (!(d[k] <= d[k - 1] && d[k] <= d[k + 1])) continue;
      double best = d[k];
      double t = golden_min([&](double u) { return dist(tr.at(u), a0); }, tr.times[k - 1], tr.times[k + 1], &best);
      if (best < near_tol) {
        out.push_back({a0, t, "start " + std::to_string(s), best});
        break;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const OrbitGuess& a, const OrbitGuess& b) { return a.recurrence_distance < b.recurrence_distance; });
  return out;
}

std::vector<OrbitGuess> recurrence_guesses(const OdeSystem& system, const PointCloud& cloud, double horizon,
                                           double near_tol, const RecurrenceOptions& options) {
  std::vector<std::size_t> order(cloud.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cloud.points[a].P < cloud.points[b].P; });
  std::vector<State> starts;
  std::vector<std::string> ids;
  for (std::size_t k : order) {
    const auto& p = cloud.points[k];
    bool seen = false;
    for (const auto& s : starts) seen = seen || dist(s, p.a) < options.dedupe_tol;
    if (seen) continue;
    starts.push_back(p.a);
    ids.push_back("run " + std::to_string(p.run) + " iter " + std::to_string(p.iter));
  }
  auto guesses = recurrence_guesses(system, starts, horizon, near_tol, options);
  for (auto& g : guesses) {
    std::size_t s = std::stoul(g.provenance.substr(6));
    g.provenance = ids[s];
  }
  return guesses;
}

PeriodicOrbit close_orbit(const OdeSystem& system, const OrbitGuess& guess, const ShootingSettings& settings) {
  const int n = system.dimension;
  if (static_cast<int>(guess.a0.size()) != n) throw DimensionMismatch("close_orbit: guess dimension");
  for (double v : guess.a0) {
    if (!std::isfinite(v)) throw std::invalid_argument("close_orbit: guess must be finite");
  }
  if (!(guess.T > 0) || !std::isfinite(guess.T)) throw std::invalid_argument("close_orbit: period must be positive");
  VectorField field(system.f);
  PeriodicOrbit orbit;
  orbit.system = system.name;
  orbit.parameters = system.parameters;
  orbit.provenance = guess.provenance;
  orbit.a0 = guess.a0;
  orbit.T = guess.T;

  const State fg = field(guess.a0);
  if (norm(fg) < settings.equilibrium_tol) {
    orbit.status = OrbitStatus::converged_to_equilibrium;
    orbit.closure_residual = closure_residual(system, orbit.a0, orbit.T, settings.control);
    orbit.residual_history.push_back(orbit.closure_residual);
    return orbit;
  }

  State a = guess.a0;
  double T = guess.T;
  if (settings.period_window > 0) {
    try {
      const double w = settings.period_window;
      Trajectory tr = integrate(system, a, T * (1 + w), settings.control);
      double dT = dist(tr.at(T), a), best = dT;
      double t = golden_min([&](double u) { return dist(tr.at(u), a); }, T * (1 - w), T * (1 + w), &best);
      if (best < dT) T = t;
    } catch (const IntegrationError&) {
    }
  }

  auto phase = [&](const State& x) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += fg[static_cast<std::size_t>(i)] * (x[static_cast<std::size_t>(i)] - guess.a0[static_cast<std::size_t>(i)]);
    return s;
  };
  auto merit = [&](const State& x, double period, double* closure) {
    State end = integrate_streaming(system, x, period, settings.control, nullptr);
    double c = dist(end, x);
    if (closure) *closure = c;
    return std::hypot(c, phase(x));
  };

  State best_a = a;
  double best_T = T, best_res = std::numeric_limits<double>::infinity();
  orbit.status = OrbitStatus::no_convergence;
  for (int it = 0; it <= settings.max_iterations; ++it) {
    MonodromyResult mr;
    try {
      mr = monodromy(system, a, T, settings.control);
    } catch (const IntegrationError&) {
      break;
    }
    Eigen::VectorXd F(n + 1);
    for (int i = 0; i < n; ++i) F(i) = mr.end_state[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)];
    F(n) = phase(a);
    const double res = F.head(n).norm();
    orbit.residual_history.push_back(res);
    orbit.iterations = it;
    if (res < best_res) {
      best_res = res;
      best_a = a;
      best_T = T;
    }
    if (res <= settings.tolerance) {
      orbit.status = OrbitStatus::converged;
      break;
    }
    if (it == settings.max_iterations) break;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n + 1, n + 1);
    J.topLeftCorner(n, n) = mr.M - Eigen::MatrixXd::Identity(n, n);
    State fe = field(mr.end_state);
    for (int i = 0; i < n; ++i) {
      J(i, n) = fe[static_cast<std::size_t>(i)];
      J(n, i) = fg[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd delta = -J.fullPivLu().solve(F);
    if (!delta.allFinite()) break;
    const double f0 = F.norm();
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= settings.max_halvings; ++h, step *= 0.5) {
      State trial(a);
      for (int i = 0; i < n; ++i) trial[static_cast<std::size_t>(i)] += step * delta(i);
      const double T_trial = T + step * delta(n);
      if (!(T_trial > 0)) continue;
      double m;
      try {
        m = merit(trial, T_trial, nullptr);
      } catch (const IntegrationError&) {
        continue;
      }
      if (m < f0) {
        a = std::move(trial);
        T = T_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  orbit.a0 = best_a;
  orbit.T = best_T;
  orbit.closure_residual = best_res;
  if (orbit.converged() && norm(field(orbit.a0)) < settings.equilibrium_tol) {
    orbit.status = OrbitStatus::converged_to_equilibrium;
  }
  if (std::isfinite(best_res)) fill_samples(field, orbit.a0, orbit.T, settings.samples, orbit.samples, orbit.derivatives);
  return orbit;
}

double orbit_average(const OdeSystem& system, const PeriodicOrbit& orbit, const Polynomial& phi, double rel_tol) {
  if (!(orbit.T > 0)) throw std::invalid_argument("orbit_average: orbit has no period");
  if (phi.dimension() != system.dimension) throw DimensionMismatch("orbit_average: observable dimension");
  VectorField field(system.f);
  CompiledPolynomial p(phi);
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int N = 1024; N <= (1 << 22); N *= 2) {
    const double h = orbit.T / N;
    State x = orbit.a0;
    double sum = 0.0, abs_sum = 0.0;
    for (int k = 0; k < N; ++k) {
      double v = p.value(x);
      sum += v;
      abs_sum += std::abs(v);
      if (k + 1 < N) x = rk4_step(field, x, h);
    }
    const double avg = sum / N;
    if (std::isfinite(prev) && std::abs(avg - prev) <= rel_tol * std::max(std::abs(avg), abs_sum / N)) return avg;
    if (abs_sum == 0.0) return 0.0;
    prev = avg;
  }
  return prev;
}

std::vector<std::complex<double>> floquet_multipliers(const OdeSystem& system, const PeriodicOrbit& orbit,
                                                      const IntegratorControl& control) {
  if (!(orbit.T > 0)) throw std::invalid_argument("floquet_multipliers: orbit has no period");
  MonodromyResult mr = monodromy(system, orbit.a0, orbit.T, control);
  Eigen::EigenSolver<Eigen::MatrixXd> es(mr.M, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("floquet_multipliers: eigenvalue iteration failed");
  std::vector<std::complex<double>> mu(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::stable_sort(mu.begin(), mu.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
  return mu;
}

std::vector<PeriodicOrbit> symmetry_images(const OdeSystem& system, const PeriodicOrbit& orbit, const SymmetryGroup& G,
                                           double match_tol) {
  if (G.size() > 0 && G.dimension() != system.dimension) throw DimensionMismatch("symmetry_images: group dimension");
  std::vector<PeriodicOrbit> kept{orbit};
  const std::size_t N = orbit.samples.size();
  const std::size_t stride = std::max<std::size_t>(1, N / 200);
  for (const auto& g : G.non_identity()) {
    PeriodicOrbit img = orbit;
    img.a0 = g.apply(orbit.a0);
    for (std::size_t k = 0; k < N; ++k) {
      img.samples[k] = g.apply(orbit.samples[k]);
      img.derivatives[k] = g.apply(orbit.derivatives[k]);
    }
    bool duplicate = false;
    for (const auto& other : kept) {
      if (distance_to_orbit(other, img.a0) >= match_tol) continue;
      double worst = 0.0;
      for (std::size_t k = 0; k < N && worst < match_tol; k += stride) worst = std::max(worst, distance_to_orbit(other, img.samples[k]));
      if (worst < match_tol) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    img.closure_residual = closure_residual(system, img.a0, img.T);
    img.floquet = orbit.floquet;
    img.averages.clear();
    img.provenance = orbit.provenance + " (symmetry image)";
    kept.push_back(std::move(img));
  }
  return kept;
}

double fraction_in_sublevel(const PeriodicOrbit& orbit, const IndicatorPoly& P, double epsilon) {
  if (orbit.samples.empty()) throw std::logic_error("fraction_in_sublevel: no samples");
  std::size_t inside = 0;
  for (const auto& a : orbit.samples) inside += P.value(a) <= epsilon ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(orbit.samples.size());
}

void PeriodicOrbit::write_json(std::ostream& out) const {
  nlohmann::ordered_json j;
  j["schema"] = "sosupo-orbit/1";
  j["system"] = system;
  j["parameters"] = parameters;
  j["status"] = to_string(status);
  j["a0"] = a0;
  j["T"] = T;
  j["closure_residual"] = closure_residual;
  j["iterations"] = iterations;
  auto mult = nlohmann::ordered_json::array();
  for (auto m : floquet) mult.push_back({m.real(), m.imag()});
  j["floquet"] = std::move(mult);
  j["averages"] = averages;
  j["residual_history"] = residual_history;
  j["provenance"] = provenance;
  out << j.dump(1) << "\n";
}

void PeriodicOrbit::write_samples_csv(std::ostream& out) const {
  out << "t";
  for (std::size_t i = 0; i < a0.size(); ++i) out << ",a" << (i + 1);
  out << "\n";
  char buf[64];
  const std::size_t N = samples.size();
  for (std::size_t k = 0; k < N; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", T * static_cast<double>(k) / static_cast<double>(N));
    out << buf;
    for (double v : samples[k]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace sosupo
