#include "sosupo/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "sosupo/errors.hpp"

namespace sosupo {

// ---------------------------------------------------------------------------------------------
// Systems

VectorField::VectorField(const std::vector<Polynomial>& f) {
  components_.reserve(f.size());
  for (const auto& fi : f) {
    if (fi.dimension() != static_cast<int>(f.size())) throw DimensionMismatch("VectorField: component dimension");
    components_.emplace_back(fi);
  }
}

void VectorField::eval(const double* a, double* out) const {
  const auto n = static_cast<std::size_t>(dimension());
  std::span<const double> x(a, n);
  for (std::size_t i = 0; i < n; ++i) out[i] = components_[i].value(x);
}

State VectorField::operator()(const State& a) const {
  if (static_cast<int>(a.size()) != dimension()) throw DimensionMismatch("VectorField: state dimension");
  State out(a.size());
  eval(a.data(), out.data());
  return out;
}

void VectorField::jacobian(const double* a, double* out) const {
  const auto n = static_cast<std::size_t>(dimension());
  std::span<const double> x(a, n);
  for (std::size_t i = 0; i < n; ++i) components_[i].value_and_gradient(x, std::span<double>(out + i * n, n));
}

Eigen::MatrixXd VectorField::jacobian(const State& a) const {
  const int n = dimension();
  if (static_cast<int>(a.size()) != n) throw DimensionMismatch("VectorField: state dimension");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> J(n, n);
  jacobian(a.data(), J.data());
  return J;
}

void OdeSystem::validate() const {
  if (dimension <= 0 || static_cast<int>(f.size()) != dimension) throw ModelError(name + ": field size mismatch");
  for (const auto& fi : f) {
    if (fi.dimension() != dimension) throw ModelError(name + ": component dimension mismatch");
  }
  for (const auto& [key, p] : observables) {
    if (p.dimension() != dimension) throw ModelError(name + ": observable '" + key + "' has wrong dimension");
  }
  VectorField field(f);
  for (const auto& eq : known_equilibria) {
    if (static_cast<int>(eq.size()) != dimension) throw ModelError(name + ": equilibrium dimension mismatch");
    State v = field(eq);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (std::sqrt(norm) > 1e-10) {
      std::ostringstream os;
      os << name << ": known equilibrium has ||f|| = " << std::sqrt(norm);
      throw ModelError(os.str());
    }
  }
  if (symmetry_group) {
    if (symmetry_group->dimension() != dimension) throw ModelError(name + ": symmetry group dimension mismatch");
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (const auto& T : symmetry_group->non_identity()) {
      for (int k = 0; k < 100; ++k) {
        State a(static_cast<std::size_t>(dimension));
        for (double& x : a) x = U(rng);
        State lhs = field(T.apply(a));
        State rhs = T.apply(field(a));
        for (std::size_t i = 0; i < a.size(); ++i) {
          if (std::abs(lhs[i] - rhs[i]) > 1e-10) {
            throw ModelError(name + ": field is not equivariant under " + T.to_string());
          }
        }
      }
    }
  }
}

Polynomial OdeSystem::observable(const std::string& name_or_text) const {
  auto it = observables.find(name_or_text);
  if (it != observables.end()) return it->second;
  return Polynomial::parse(name_or_text, dimension);
}

namespace {

Polynomial var(int n, int i) { return Polynomial::variable(n, i); }
Polynomial cst(int n, double v) { return Polynomial::constant(n, v); }

SymmetryGroup point_reflection(int n) {
  return SymmetryGroup::generate({LinearSymmetry::sign_flip(std::vector<int>(static_cast<std::size_t>(n), -1))});
}

}  // namespace

OdeSystem make_vanderpol(double mu) {
  if (!std::isfinite(mu)) throw ModelError("vanderpol: mu must be finite");
  OdeSystem s;
  s.name = "vanderpol";
  s.dimension = 2;
  const Polynomial x = var(2, 0), y = var(2, 1);
  s.f = {y, mu * y - mu * x * x * y - x};
  s.symmetry_group = point_reflection(2);
  s.observables = {{"x2", x * x}, {"y2", y * y}, {"energy", x * x + y * y}};
  s.known_equilibria = {{0.0, 0.0}};
  s.parameters = {{"mu", mu}};
  s.validate();
  return s;
}

OdeSystem make_lorenz(double sigma, double rho, double beta) {
  if (!std::isfinite(sigma) || !std::isfinite(rho) || !std::isfinite(beta)) {
    throw ModelError("lorenz: parameters must be finite");
  }
  OdeSystem s;
  s.name = "lorenz";
  s.dimension = 3;
  const Polynomial x = var(3, 0), y = var(3, 1), z = var(3, 2);
  s.f = {sigma * (y - x), rho * x - y - x * z, x * y - beta * z};
  s.symmetry_group = SymmetryGroup::generate({LinearSymmetry::sign_flip({-1, -1, 1})});
  s.observables = {{"z", z}, {"x2", x * x}, {"energy", x * x + y * y + z * z}};
  s.known_equilibria = {{0.0, 0.0, 0.0}};
  if (beta * (rho - 1.0) > 0) {
    const double r = std::sqrt(beta * (rho - 1.0));
    s.known_equilibria.push_back({r, r, rho - 1.0});
    s.known_equilibria.push_back({-r, -r, rho - 1.0});
  }
  s.parameters = {{"sigma", sigma}, {"rho", rho}, {"beta", beta}};
  s.validate();
  return s;
}

OdeSystem make_moehlis9(double Re) { return make_moehlis9(Re, moehlis9_coefficients()); }

OdeSystem make_moehlis9(double Re, const ModelCoefficients& c) {
  if (!(Re > 0) || !std::isfinite(Re)) throw ModelError("moehlis9: Re must be positive");
  verify_coefficients(c);
  const int n = 9;
  OdeSystem s;
  s.name = "moehlis9";
  s.dimension = n;
  s.f.assign(n, Polynomial(n));
  s.f[0] += cst(n, c.lambda_decay[0] / Re);
  for (int i = 0; i < n; ++i) s.f[static_cast<std::size_t>(i)] -= var(n, i) * (c.lambda_decay[static_cast<std::size_t>(i)] / Re);
  for (const auto& e : c.N) s.f[static_cast<std::size_t>(e.i)] += var(n, e.j) * var(n, e.k) * e.value;

  s.symmetry_group = SymmetryGroup::generate({LinearSymmetry::sign_flip({1, 1, 1, -1, -1, -1, -1, -1, 1}),
                                              LinearSymmetry::sign_flip({1, -1, -1, 1, 1, -1, -1, -1, 1})});
  Polynomial D(n), E = (cst(n, 1.0) - var(n, 0)) * (cst(n, 1.0) - var(n, 0));
  for (int i = 0; i < n; ++i) D += var(n, i) * var(n, i) * (c.lambda_decay[static_cast<std::size_t>(i)] / Re);
  for (int i = 1; i < n; ++i) E += var(n, i) * var(n, i);
  s.observables = {{"dissipation", D}, {"D", D}, {"perturbation_energy", E}, {"E", E}, {"energy", squared_norm(n)}};
  State laminar(n, 0.0);
  laminar[0] = 1.0;
  s.known_equilibria = {laminar};
  s.parameters = {{"Re", Re}, {"Lx", 2.0 * 3.14159265358979323846 / c.alpha}, {"Lz", 2.0 * 3.14159265358979323846 / c.gamma}};
  s.validate();
  return s;
}

OdeSystem make_harmonic() {
  OdeSystem s;
  s.name = "harmonic";
  s.dimension = 2;
  const Polynomial x = var(2, 0), y = var(2, 1);
  s.f = {y, -x};
  s.symmetry_group = point_reflection(2);
  s.observables = {{"x2", x * x}, {"energy", x * x + y * y}};
  s.known_equilibria = {{0.0, 0.0}};
  s.validate();
  return s;
}

OdeSystem make_decay() {
  OdeSystem s;
  s.name = "decay";
  s.dimension = 1;
  const Polynomial x = var(1, 0);
  s.f = {-x};
  s.symmetry_group = point_reflection(1);
  s.observables = {{"x2", x * x}};
  s.known_equilibria = {{0.0}};
  s.validate();
  return s;
}

OdeSystem make_bistable() {
  OdeSystem s;
  s.name = "bistable";
  s.dimension = 1;
  const Polynomial x = var(1, 0);
  s.f = {x - x * x * x};
  s.symmetry_group = point_reflection(1);
  s.observables = {{"x2", x * x}};
  s.known_equilibria = {{0.0}, {1.0}, {-1.0}};
  s.validate();
  return s;
}

OdeSystem make_custom(const std::string& name, std::vector<Polynomial> f, std::map<std::string, Polynomial> observables,
                      std::optional<SymmetryGroup> group) {
  OdeSystem s;
  s.name = name;
  s.dimension = static_cast<int>(f.size());
  s.f = std::move(f);
  s.observables = std::move(observables);
  s.symmetry_group = std::move(group);
  s.validate();
  return s;
}

std::vector<SystemInfo> list_systems() {
  return {
      {"vanderpol", 2, {{"mu", 1.0}}, "x' = y, y' = mu (1 - x^2) y - x"},
      {"lorenz", 3, {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}}, "Lorenz 1963"},
      {"moehlis9", 9, {{"Re", 100.0}}, "nine-mode sinusoidal shear flow, Lx = 4 pi, Lz = 2 pi"},
      {"harmonic", 2, {}, "x' = y, y' = -x"},
      {"decay", 1, {}, "x' = -x"},
      {"bistable", 1, {}, "x' = x - x^3"},
  };
}

OdeSystem make_system(const std::string& name, const std::map<std::string, double>& parameters) {
  for (const auto& info : list_systems()) {
    if (info.name != name) continue;
    std::map<std::string, double> p = info.defaults;
    for (const auto& [k, v] : parameters) {
      if (!p.count(k)) throw ModelError("system '" + name + "' has no parameter '" + k + "'");
      p[k] = v;
    }
    if (name == "vanderpol") return make_vanderpol(p["mu"]);
    if (name == "lorenz") return make_lorenz(p["sigma"], p["rho"], p["beta"]);
    if (name == "moehlis9") return make_moehlis9(p["Re"]);
    if (name == "harmonic") return make_harmonic();
    if (name == "decay") return make_decay();
    if (name == "bistable") return make_bistable();
  }
  throw ModelError("unknown system '" + name + "'");
}

// ---------------------------------------------------------------------------------------------
// Integration

void IntegratorControl::validate() const {
  if (!(rtol > 0) || !(atol > 0)) throw std::invalid_argument("integrator: tolerances must be positive");
  if (method == StepMethod::rk4 && !(dt > 0)) throw std::invalid_argument("integrator: rk4 step must be positive");
  if (initial_step < 0 || max_step < 0) throw std::invalid_argument("integrator: step bounds must be nonnegative");
  if (!(blowup_norm > 0)) throw std::invalid_argument("integrator: blow-up norm must be positive");
}

namespace {

using Rhs = std::function<void(const double*, double*)>;

// Dormand-Prince 5(4).
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

struct Engine {
  Rhs rhs;
  int n = 0;             // full system size
  int state_size = 0;    // leading entries checked for blow-up
  std::string system_name;
  IntegratorControl ctl;
  StepStats stats;

  double state_norm(const double* x) const {
    double s = 0.0;
    for (int i = 0; i < state_size; ++i) s += x[i] * x[i];
    return std::sqrt(s);
  }

  void check(double t, const double* x) const {
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(x[i])) {
        std::ostringstream os;
        os << system_name << ": non-finite state at t = " << t;
        throw IntegrationError(os.str());
      }
    }
    double nrm = state_norm(x);
    if (nrm > ctl.blowup_norm) {
      std::ostringstream os;
      os << system_name << ": blow-up at t = " << t << " (|a| = " << nrm << " > " << ctl.blowup_norm << ")";
      throw IntegrationError(os.str());
    }
  }

  double error_norm(const double* x0, const double* x1, const double* err) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double sc = ctl.atol + ctl.rtol * std::max(std::abs(x0[i]), std::abs(x1[i]));
      double r = err[i] / sc;
      s += r * r;
    }
    return std::sqrt(s / n);
  }

  double initial_step(const double* x, const double* f0, double span) {
    if (ctl.initial_step > 0) return std::min(ctl.initial_step, span);
    std::vector<double> sc(static_cast<std::size_t>(n)), x1(static_cast<std::size_t>(n)), f1(static_cast<std::size_t>(n));
    double d0 = 0, d1 = 0;
    for (int i = 0; i < n; ++i) {
      sc[static_cast<std::size_t>(i)] = ctl.atol + ctl.rtol * std::abs(x[i]);
      d0 += std::pow(x[i] / sc[static_cast<std::size_t>(i)], 2);
      d1 += std::pow(f0[i] / sc[static_cast<std::size_t>(i)], 2);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    for (int i = 0; i < n; ++i) x1[static_cast<std::size_t>(i)] = x[i] + h0 * f0[i];
    rhs(x1.data(), f1.data());
    ++stats.evaluations;
    double d2 = 0;
    for (int i = 0; i < n; ++i) d2 += std::pow((f1[static_cast<std::size_t>(i)] - f0[i]) / sc[static_cast<std::size_t>(i)], 2);
    d2 = std::sqrt(d2 / n) / h0;
    double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    return std::min({100.0 * h0, h1, span});
  }

  // Integrates x over [0, t_end] in place.
  void run(std::vector<double>& x, double t_end, const StepObserver& observer) {
    ctl.validate();
    if (!(t_end > 0) || !std::isfinite(t_end)) throw std::invalid_argument("integrate: t_end must be positive");
    check(0.0, x.data());
    const auto N = static_cast<std::size_t>(n);
    std::vector<double> f0(N), f1(N), xn(N);
    rhs(x.data(), f0.data());
    ++stats.evaluations;
    double t = 0.0;

    if (ctl.method == StepMethod::rk4) {
      std::vector<double> k2(N), k3(N), k4(N), tmp(N);
      const long steps = static_cast<long>(std::ceil(t_end / ctl.dt - 1e-9));
      for (long s = 0; s < steps; ++s) {
        const double h = std::min(ctl.dt, t_end - t);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * h * f0[i];
        rhs(tmp.data(), k2.data());
        for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        rhs(tmp.data(), k3.data());
        for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + h * k3[i];
        rhs(tmp.data(), k4.data());
        for (std::size_t i = 0; i < N; ++i) xn[i] = x[i] + h / 6.0 * (f0[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        rhs(xn.data(), f1.data());
        stats.evaluations += 4;
        const double t1 = s + 1 == steps ? t_end : t + h;
        check(t1, xn.data());
        ++stats.accepted;
        if (observer) observer({t, t1, x.data(), xn.data(), f0.data(), f1.data()});
        x.swap(xn);
        f0.swap(f1);
        t = t1;
      }
      return;
    }

    std::vector<double> k2(N), k3(N), k4(N), k5(N), k6(N), tmp(N), err(N);
    double h = initial_step(x.data(), f0.data(), t_end);
    bool last_rejected = false;
    while (t < t_end) {
      if (stats.accepted + stats.rejected >= ctl.max_steps) throw IntegrationError(system_name + ": step budget exhausted");
      if (ctl.max_step > 0) h = std::min(h, ctl.max_step);
      bool final_step = false;
      if (t + h >= t_end || t_end - (t + h) < 1e-12 * std::max(1.0, t_end)) {
        h = t_end - t;
        final_step = true;
      }
      for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + h * a21 * f0[i];
      rhs(tmp.data(), k2.data());
      for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + h * (a31 * f0[i] + a32 * k2[i]);
      rhs(tmp.data(), k3.data());
      for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + h * (a41 * f0[i] + a42 * k2[i] + a43 * k3[i]);
      rhs(tmp.data(), k4.data());
      for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + h * (a51 * f0[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      rhs(tmp.data(), k5.data());
      for (std::size_t i = 0; i < N; ++i) {
        tmp[i] = x[i] + h * (a61 * f0[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      }
      rhs(tmp.data(), k6.data());
      for (std::size_t i = 0; i < N; ++i) {
        xn[i] = x[i] + h * (a71 * f0[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      }
      rhs(xn.data(), f1.data());
      stats.evaluations += 6;
      for (std::size_t i = 0; i < N; ++i) {
        err[i] = h * (e1 * f0[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * f1[i]);
      }
      double en = error_norm(x.data(), xn.data(), err.data());
      if (!std::isfinite(en)) en = 1e10;
      if (en <= 1.0) {
        const double t1 = final_step ? t_end : t + h;
        check(t1, xn.data());
        ++stats.accepted;
        if (observer) observer({t, t1, x.data(), xn.data(), f0.data(), f1.data()});
        x.swap(xn);
        f0.swap(f1);
        t = t1;
        double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        if (last_rejected) fac = std::min(fac, 1.0);
        h *= fac;
        last_rejected = false;
      } else {
        ++stats.rejected;
        h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
        last_rejected = true;
      }
      if (t < t_end && h < 1e-14 * std::max(1.0, std::abs(t))) {
        std::ostringstream os;
        os << system_name << ": step size underflow at t = " << t;
        throw IntegrationError(os.str());
      }
    }
  }
};

Engine state_engine(const OdeSystem& system, const IntegratorControl& control) {
  auto field = std::make_shared<VectorField>(system.f);
  Engine e;
  e.rhs = [field](const double* x, double* out) { field->eval(x, out); };
  e.n = system.dimension;
  e.state_size = system.dimension;
  e.system_name = system.name;
  e.ctl = control;
  return e;
}

void require_state(const OdeSystem& system, const State& a0) {
  if (static_cast<int>(a0.size()) != system.dimension) throw DimensionMismatch("integrate: initial state dimension");
  for (double v : a0) {
    if (!std::isfinite(v)) throw std::invalid_argument("integrate: initial state must be finite");
  }
}

State hermite(double t0, double t1, const double* x0, const double* x1, const double* f0, const double* f1, int n,
              double t) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  State out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i];
  return out;
}

}  // namespace

State integrate_streaming(const OdeSystem& system, const State& a0, double t_end, const IntegratorControl& control,
                          const StepObserver& observer, StepStats* stats) {
  require_state(system, a0);
  Engine e = state_engine(system, control);
  State x = a0;
  e.run(x, t_end, observer);
  if (stats) *stats = e.stats;
  return x;
}

Trajectory integrate(const OdeSystem& system, const State& a0, double t_end, const IntegratorControl& control) {
  Trajectory tr;
  const int n = system.dimension;
  auto observer = [&](const StepRecord& r) {
    if (tr.times.empty()) {
      tr.times.push_back(r.t0);
      tr.states.emplace_back(r.x0, r.x0 + n);
      tr.derivatives.emplace_back(r.f0, r.f0 + n);
    }
    tr.times.push_back(r.t1);
    tr.states.emplace_back(r.x1, r.x1 + n);
    tr.derivatives.emplace_back(r.f1, r.f1 + n);
  };
  integrate_streaming(system, a0, t_end, control, observer, &tr.stats);
  return tr;
}

State Trajectory::at(double t) const {
  if (times.empty()) throw std::out_of_range("Trajectory::at: empty trajectory");
  if (t < times.front() || t > times.back()) throw std::out_of_range("Trajectory::at: time outside trajectory");
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = it == times.end() ? times.size() - 1 : static_cast<std::size_t>(it - times.begin());
  if (k == 0) return states.front();
  const std::size_t j = k - 1;
  return hermite(times[j], times[k], states[j].data(), states[k].data(), derivatives[j].data(), derivatives[k].data(),
                 dimension(), t);
}

void Trajectory::write_csv(std::ostream& out) const {
  out << "t";
  for (int i = 0; i < dimension(); ++i) out << ",a" << (i + 1);
  out << "\n";
  char buf[64];
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", times[k]);
    out << buf;
    for (double v : states[k]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

double time_average(const OdeSystem& system, const Polynomial& phi, const State& a0, double T,
                    std::optional<double> transient, const IntegratorControl& control) {
  if (phi.dimension() != system.dimension) throw DimensionMismatch("time_average: observable dimension");
  const double t0 = transient.value_or(0.2 * T);
  if (!(T > t0) || t0 < 0) throw std::invalid_argument("time_average: need T > transient >= 0");
  State start = t0 > 0 ? integrate_streaming(system, a0, t0, control, nullptr) : a0;
  const CompiledPolynomial p(phi);
  const int n = system.dimension;
  std::vector<double> g0(static_cast<std::size_t>(n)), g1(static_cast<std::size_t>(n));
  double sum = 0.0;
  auto observer = [&](const StepRecord& r) {
    const double h = r.t1 - r.t0;
    double p0 = p.value_and_gradient(std::span<const double>(r.x0, static_cast<std::size_t>(n)), g0);
    double p1 = p.value_and_gradient(std::span<const double>(r.x1, static_cast<std::size_t>(n)), g1);
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < n; ++i) {
      d0 += g0[static_cast<std::size_t>(i)] * r.f0[i];
      d1 += g1[static_cast<std::size_t>(i)] * r.f1[i];
    }
    sum += 0.5 * h * (p0 + p1) + h * h / 12.0 * (d0 - d1);
  };
  integrate_streaming(system, start, T - t0, control, observer);
  return sum / (T - t0);
}

MonodromyResult monodromy(const OdeSystem& system, const State& a0, double T, const IntegratorControl& control) {
  require_state(system, a0);
  const int n = system.dimension;
  auto field = std::make_shared<VectorField>(system.f);
  auto J = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * n));
  Engine e;
  e.n = n + n * n;
  e.state_size = n;
  e.system_name = system.name;
  e.ctl = control;
  // Layout: a (n), then M row-major.
  e.rhs = [field, J, n](const double* x, double* out) {
    field->eval(x, out);
    field->jacobian(x, J->data());
    const double* M = x + n;
    double* dM = out + n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += (*J)[static_cast<std::size_t>(i * n + k)] * M[k * n + j];
        dM[i * n + j] = s;
      }
    }
  };
  std::vector<double> x(static_cast<std::size_t>(n + n * n), 0.0);
  std::copy(a0.begin(), a0.end(), x.begin());
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(n + i * n + i)] = 1.0;
  e.run(x, T, nullptr);
  MonodromyResult res;
  res.end_state.assign(x.begin(), x.begin() + n);
  res.M.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) res.M(i, j) = x[static_cast<std::size_t>(n + i * n + j)];
  return res;
}

}  // namespace sosupo
