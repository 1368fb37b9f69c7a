// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when any fails.
// Usage: acceptance [external-moehlis9-re95-certificate.json]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "sosupo/io.hpp"
#include "sosupo/localize.hpp"
#include "sosupo/pipeline.hpp"
#include "sosupo/sdp.hpp"
#include "sosupo/sos.hpp"
#include "sosupo/upo.hpp"

namespace fs = std::filesystem;
using namespace sosupo;

namespace {

// Pinned tolerances.
constexpr double kSdpTol = 1e-6;
constexpr double kSdpSeconds = 1.0;
constexpr double kBistableLo = 1e-3, kBistableHi = 1e-6, kBistableSeconds = 10.0;
constexpr double kVdpBoundRel = 0.01, kVdpCloudFraction = 0.90, kVdpCloudDistance = 0.1;
constexpr double kVdpResidual = 1e-9, kVdpPeriodTol = 1e-6, kVdpSeconds = 300.0;
constexpr double kFractionSlack = 0.01;
constexpr int kFractionSamples = 10000;
constexpr double kReductionTol = 1e-6, kReductionSpeedup = 2.0;
constexpr double kEnergyTol = 1e-12, kLaminarTol = 1e-12, kEquivarianceTol = 1e-10;
constexpr double kMonodromyTol = 1e-5;
constexpr double kSandwichTol = 1e-4, kSandwichTime = 1e4, kMonotoneTol = 1e-6;
constexpr double kExternalRel = 0.005;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("sosupo_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void sdp_oracle() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  double worst = 0.0, slowest = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd A(5, 5);
    oracle::Matrix a(5, std::vector<double>(5));
    for (int r = 0; r < 5; ++r)
      for (int c = r; c < 5; ++c) {
        A(r, c) = A(c, r) = a[r][c] = a[c][r] = g(rng);
      }
    // minimize lambda s.t. lambda I - A = X, X PSD.
    SdpProblem p;
    p.block_sizes = {5};
    p.num_free = 1;
    p.objective_free = {1.0};
    p.free_names = {"lambda"};
    for (int r = 0; r < 5; ++r)
      for (int c = r; c < 5; ++c) {
        ConstraintRow row;
        row.matrix_entries.push_back({0, r, c, r == c ? 1.0 : 0.5});
        if (r == c) row.free_entries.push_back({0, -1.0});
        row.rhs = -A(r, c);
        p.rows.push_back(row);
      }
    auto t0 = std::chrono::steady_clock::now();
    auto sol = solve_sdp(p);
    slowest = std::max(slowest, since(t0));
    if (sol.status != SdpStatus::optimal) {
      ok = false;
      continue;
    }
    worst = std::max(worst, std::abs(sol.free_values[0] - oracle::jacobi_eigenvalues(a).back()));
  }
  report(ok && worst <= kSdpTol && slowest < kSdpSeconds, "sdp-oracle-equivalence",
         fmt("20 random 5x5, max |lambda - jacobi| = %.2e (tol %.0e), slowest solve %.3f s (< %.0f s)", worst, kSdpTol,
             slowest, kSdpSeconds));
}

void bistable() {
  auto t0 = std::chrono::steady_clock::now();
  VAnsatz a;
  a.degree = 6;
  auto res = compute_bound({Polynomial::parse("x - x^3", 1)}, Polynomial::parse("x^2", 1), a);
  const double secs = since(t0);
  const double lambda = res.certificate ? res.certificate->lambda : NAN;
  report(res.certificate && lambda >= 1.0 - kBistableLo && lambda <= 1.0 + kBistableHi && secs < kBistableSeconds,
         "bistable-degree-6", fmt("lambda = %.9f in [1 - %.0e, 1 + %.0e], %.3f s (< %.0f s)", lambda, kBistableLo,
                                  kBistableHi, secs, kBistableSeconds));
}

/// Average of x^2 on the van der Pol cycle by fixed-step RK4 over whole periods.
double vanderpol_average_oracle(double period) {
  auto f = [](double x, double y, double& dx, double& dy) {
    dx = y;
    dy = (1 - x * x) * y - x;
  };
  auto step = [&](double& x, double& y, double h) {
    double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y;
    f(x, y, k1x, k1y);
    f(x + 0.5 * h * k1x, y + 0.5 * h * k1y, k2x, k2y);
    f(x + 0.5 * h * k2x, y + 0.5 * h * k2y, k3x, k3y);
    f(x + h * k3x, y + h * k3y, k4x, k4y);
    x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y);
  };
  double x = 2.0, y = 0.0;
  for (int i = 0; i < 200000; ++i) step(x, y, 1e-3);
  const int steps = static_cast<int>(std::lround(300 * period / 1e-3));
  const double h = 300 * period / steps;
  double sum = 0.5 * x * x;
  for (int i = 0; i < steps; ++i) {
    step(x, y, h);
    sum += x * x;
  }
  sum -= 0.5 * x * x;
  return sum * h / (300 * period);
}

void vanderpol() {
  RunConfig cfg = RunConfig::load(SOSUPO_SOURCE_DIR "/configs/vanderpol.ini");
  cfg.out = scratch("vanderpol").string();
  std::ostringstream log;
  auto t0 = std::chrono::steady_clock::now();
  auto r = run_pipeline(cfg, log);
  const double secs = since(t0);
  if (r.code != kExitOk) {
    report(false, "vanderpol-end-to-end", "pipeline exit " + std::to_string(r.code) + ": " + r.message);
    report(false, "fraction-of-period", "no orbit");
    return;
  }
  const double Tref = oracle::vanderpol_period(1.0);
  const double avg_ref = vanderpol_average_oracle(Tref);

  std::ifstream cert_in(fs::path(cfg.out) / "certificate.json");
  auto cert = read_certificate_json(cert_in).certificate;
  auto orbits = nlohmann::json::parse(slurp(fs::path(cfg.out) / "orbits.json"));
  const auto& oj = orbits["orbits"][0];
  const double T = oj["T"].get<double>(), residual = oj["closure_residual"].get<double>();

  // Rebuild the archived orbit for distance and fraction queries.
  auto sys = make_vanderpol(1.0);
  ShootingSettings s;
  s.samples = kFractionSamples;
  auto orbit = close_orbit(sys, {oj["a0"].get<State>(), T, "archive", 0.0}, s);

  std::ifstream cloud_in(fs::path(cfg.out) / "cloud_0.csv");
  auto cloud = PointCloud::read_csv(cloud_in);
  std::size_t near = 0;
  for (const auto& p : cloud.points)
    if (distance_to_orbit(orbit, p.a) <= kVdpCloudDistance) ++near;
  const double frac = cloud.points.empty() ? 0.0 : double(near) / double(cloud.points.size());

  const double rel = (cert.lambda - avg_ref) / avg_ref;
  const bool bound_ok = cert.lambda >= avg_ref && rel <= kVdpBoundRel;
  const bool cloud_ok = frac >= kVdpCloudFraction;
  const bool newton_ok = residual <= kVdpResidual && std::abs(T - Tref) <= kVdpPeriodTol;
  report(bound_ok && cloud_ok && newton_ok && secs < kVdpSeconds, "vanderpol-end-to-end",
         fmt("degree-%d bound %.6f vs oracle average %.9f (+%.2f%%, need <= %.0f%%)%s; cloud %zu/%zu = %.1f%% within "
             "%.1f of cycle (need >= %.0f%%)%s; residual %.2e (<= %.0e), T = %.10f vs oracle %.10f (|dT| %.1e, tol "
             "%.0e)%s; %.1f s (< %.0f s)",
             cert.degree, cert.lambda, avg_ref, 100 * rel, 100 * kVdpBoundRel, bound_ok ? "" : " FAIL",
             near, cloud.points.size(), 100 * frac, kVdpCloudDistance, 100 * kVdpCloudFraction, cloud_ok ? "" : " FAIL",
             residual, kVdpResidual, T, Tref, std::abs(T - Tref), kVdpPeriodTol, newton_ok ? "" : " FAIL", secs,
             kVdpSeconds));

  // Informational: the same run at degree 10.
  RunConfig c10 = cfg;
  c10.degree = 10;
  c10.out = scratch("vanderpol10").string();
  std::ostringstream log10;
  if (run_pipeline(c10, log10).code == kExitOk) {
    std::ifstream in10(fs::path(c10.out) / "certificate.json");
    const double l10 = read_certificate_json(in10).certificate.lambda;
    std::ifstream cin10(fs::path(c10.out) / "cloud_0.csv");
    auto cloud10 = PointCloud::read_csv(cin10);
    std::size_t near10 = 0;
    for (const auto& p : cloud10.points)
      if (distance_to_orbit(orbit, p.a) <= kVdpCloudDistance) ++near10;
    std::cout << "     info: degree 10: bound "
              << fmt("%.6f (+%.2f%%), cloud %zu/%zu within %.1f of cycle", l10, 100 * (l10 - avg_ref) / avg_ref, near10,
                     cloud10.points.size(), kVdpCloudDistance)
              << "\n";
  }

  // Fraction of the period spent in S_eps = {P <= eps}, delta = lambda - orbit average.
  auto ip = build_indicator_poly(cert, sys.f, sys.observable(cfg.observable));
  const double delta = cert.lambda - orbit_average(sys, orbit, sys.observable(cfg.observable));
  bool ok = orbit.converged() && delta > 0 && orbit.samples.size() >= std::size_t(kFractionSamples);
  std::string detail = fmt("delta = %.6f, %zu samples;", delta, orbit.samples.size());
  for (double k : {2.0, 5.0, 10.0}) {
    const double got = fraction_in_sublevel(orbit, ip, k * delta);
    const double need = 1.0 - 1.0 / k - kFractionSlack;
    ok = ok && got >= need;
    detail += fmt(" eps=%gdelta: %.4f (>= %.4f)", k, got, need);
  }
  report(ok, "fraction-of-period", detail);
}

void reduction_equality() {
  auto sys = make_moehlis9(100.0);
  VAnsatz a;
  a.degree = 4;
  CompileOptions opt;
  opt.sense = BoundSense::lower_bound_of_min;
  const Polynomial D = sys.observable("D");
  auto t0 = std::chrono::steady_clock::now();
  auto full = compute_bound(sys.f, D, a, std::nullopt, opt);
  const double t_full = since(t0);
  t0 = std::chrono::steady_clock::now();
  auto red = compute_bound(sys.f, D, a, std::nullopt, opt, *sys.symmetry_group);
  const double t_red = since(t0);
  if (!full.certificate || !red.certificate) {
    report(false, "symmetry-reduction-equality", "solve failed: " + full.error + red.error);
    return;
  }
  const double diff = std::abs(full.certificate->lambda - red.certificate->lambda);
  report(diff <= kReductionTol && t_full >= kReductionSpeedup * t_red, "symmetry-reduction-equality",
         fmt("moehlis9 Re=100 min D degree 4: full %.10f (%.2f s), reduced %.10f (%.2f s), |diff| %.1e (tol %.0e), "
             "speedup %.1fx (>= %.0fx)",
             full.certificate->lambda, t_full, red.certificate->lambda, t_red, diff, kReductionTol, t_full / t_red,
             kReductionSpeedup));
}

void model_invariants() {
  auto c = moehlis9_coefficients();
  const double energy = energy_conservation_residual(c);
  auto sys = make_moehlis9(100.0);
  VectorField field(sys.f);
  State al(9, 0.0);
  al[0] = 1.0;
  double laminar = 0.0;
  for (double v : field(al)) laminar = std::max(laminar, std::abs(v));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  double equiv = 0.0;
  for (const auto& T : sys.symmetry_group->non_identity()) {
    for (int k = 0; k < 100; ++k) {
      State a(9);
      for (double& v : a) v = U(rng);
      State lhs = field(T.apply(a)), rhs = T.apply(field(a));
      for (int i = 0; i < 9; ++i) equiv = std::max(equiv, std::abs(lhs[i] - rhs[i]));
    }
  }
  report(energy <= kEnergyTol && laminar <= kLaminarTol && equiv <= kEquivarianceTol, "model-invariants",
         fmt("energy %.1e (<= %.0e), laminar residual %.1e (<= %.0e), equivariance %.1e over %zu elements x 100 "
             "points (<= %.0e)",
             energy, kEnergyTol, laminar, kLaminarTol, equiv, sys.symmetry_group->non_identity().size(),
             kEquivarianceTol));
}

void monodromy_check() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  auto monos = monomials_up_to_degree(3, 2);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Polynomial> f(3, Polynomial(3));
    for (auto& fi : f)
      for (const auto& m : monos) fi.add_term(m, 0.5 * U(rng));
    auto sys = make_custom("random", f);
    VectorField field(f);
    oracle::Flow rhs = [&](const std::vector<double>& a) { return field(a); };
    oracle::Flow flow = [&](const std::vector<double>& a) { return oracle::rk4_flow(rhs, a, 0.5, 2000); };
    State a0{0.3 * U(rng), 0.3 * U(rng), 0.3 * U(rng)};
    IntegratorControl tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    auto res = monodromy(sys, a0, 0.5, tight);
    auto J = oracle::finite_difference_jacobian(flow, a0, 1e-6);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(res.M(i, j) - J[i][j]));
  }
  report(worst <= kMonodromyTol, "monodromy-gradient",
         fmt("5 random quadratic 3D systems, max |M - FD| = %.1e (tol %.0e)", worst, kMonodromyTol));
}

void desk_scale(const char* external) {
  VAnsatz a;
  CompileOptions mn, mx;
  mn.sense = BoundSense::lower_bound_of_min;
  bool ok = true;
  std::string detail;
  for (double Re : {85.0, 95.0, 105.0}) {
    auto sys = make_moehlis9(Re);
    const Polynomial D = sys.observable("D");
    State a0(9, 0.0);
    a0[0] = 1.0;
    a0[1] = 0.07066;
    a0[2] = -0.07076;
    a0[4] = 0.1;
    const double dbar = time_average(sys, D, a0, kSandwichTime, 1000.0);
    double prev_lo = -INFINITY, prev_hi = INFINITY;
    detail += fmt(" Re=%g Dbar=%.7f:", Re, dbar);
    for (int d : {2, 4}) {
      a.degree = d;
      auto lo = compute_bound(sys.f, D, a, std::nullopt, mn, *sys.symmetry_group);
      auto hi = compute_bound(sys.f, D, a, std::nullopt, mx, *sys.symmetry_group);
      if (!lo.certificate || !hi.certificate) {
        ok = false;
        detail += fmt(" d=%d solve failed;", d);
        continue;
      }
      const double l = lo.certificate->lambda, h = hi.certificate->lambda;
      const bool sandwich = l <= dbar + kSandwichTol && dbar <= h + kSandwichTol;
      const bool mono = l >= prev_lo - kMonotoneTol && h <= prev_hi + kMonotoneTol;
      ok = ok && sandwich && mono;
      detail += fmt(" d=%d [%.7f, %.7f]%s%s", d, l, h, sandwich ? "" : " sandwich FAIL", mono ? "" : " monotone FAIL");
      prev_lo = l;
      prev_hi = h;
    }
    detail += ";";
  }

  RunConfig c6;
  c6.system = "moehlis9";
  c6.parameters = {{"Re", 95.0}};
  c6.observable = "D";
  c6.degree = 6;
  std::ostringstream sdpa;
  const std::size_t rows = export_bound_sdpa(c6, sdpa);
  const bool same = oracle::write_sdpa(oracle::parse_sdpa(sdpa.str())) == sdpa.str();
  ok = ok && same;
  detail += fmt(" degree-6 SDPA export (%zu constraints, %zu bytes) round trip %s;", rows, sdpa.str().size(),
                same ? "byte-identical" : "DIFFERS");

  if (!external) {
    detail += " external degree-10 certificate: N/A (none supplied)";
  } else {
    RunConfig c = RunConfig::load(SOSUPO_SOURCE_DIR "/configs/moehlis9_re95.ini");
    c.out = scratch("external").string();
    c.certificate = fs::absolute(external).string();
    c.degree = 10;
    std::ostringstream log;
    auto r = run_pipeline(c, log);
    if (r.code != kExitOk) {
      ok = false;
      detail += " external certificate: pipeline exit " + std::to_string(r.code);
    } else {
      auto orbits = nlohmann::json::parse(slurp(fs::path(c.out) / "orbits.json"));
      const double bound = orbits["bound"].get<double>();
      const double avg = orbits["orbits"][0]["averages"]["E"].get<double>();
      const double rel = std::abs(bound - avg) / std::abs(bound);
      ok = ok && rel <= kExternalRel;
      detail += fmt(" external certificate: E average %.6f vs bound %.6f (%.3f%%, tol %.1f%%)", avg, bound, 100 * rel,
                    100 * kExternalRel);
    }
  }
  report(ok, "desk-scale-substitute", detail);
}

}  // namespace

int main(int argc, char** argv) {
  sdp_oracle();
  bistable();
  vanderpol();
  reduction_equality();
  model_invariants();
  monodromy_check();
  desk_scale(argc > 1 ? argv[1] : nullptr);
  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
