#include "sosupo/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "sosupo/errors.hpp"
#include "sosupo/io.hpp"

namespace sosupo {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
}

const char* sense_name(BoundSense s) { return s == BoundSense::upper_bound_of_max ? "max" : "min"; }

class Manifest {
 public:
  explicit Manifest(const RunConfig& cfg) : dir_(cfg.out), path_(fs::path(cfg.out) / "manifest.json") {
    fs::create_directories(dir_);
    if (fs::exists(path_)) {
      try {
        j_ = Json::parse(slurp(path_));
      } catch (const nlohmann::json::exception&) {
        j_ = Json::object();
      }
    }
    const std::string hash = hex64(fnv1a(cfg.stage_text("converge")));
    if (!j_.is_object()) j_ = Json::object();
    j_["schema"] = "sosupo-manifest/1";
    j_["config_hash"] = hash;
    Json versions = {{"certificate", "sosupo-certificate/1"}, {"orbit", "sosupo-orbit/1"}, {"manifest", "sosupo-manifest/1"}};
    if (cfg.system == "moehlis9") versions["coefficients"] = moehlis9_coefficients().version;
    j_["versions"] = versions;
    if (!j_.contains("stages")) j_["stages"] = Json::object();
    if (!j_.contains("timings")) j_["timings"] = Json::object();
    write_file(dir_ / "config.ini", cfg.to_ini());
  }

  std::optional<StageOutcome> reusable(const std::string& stage, const std::string& hash) const {
    if (!j_["stages"].contains(stage)) return std::nullopt;
    const Json& s = j_["stages"][stage];
    if (s.value("hash", std::string()) != hash) return std::nullopt;
    const int code = s.value("exit_code", -1);
    if (code != kExitOk && code != kExitEmptyCloud && code != kExitNoConvergence) return std::nullopt;
    for (const auto& f : s["outputs"]) {
      if (!fs::exists(dir_ / f.get<std::string>())) return std::nullopt;
    }
    return StageOutcome{code, true, s.value("message", std::string())};
  }

  void record(const std::string& stage, const std::string& hash, const StageOutcome& o, const Json& outputs,
              const Json& summary, double seconds) {
    Json s;
    s["hash"] = hash;
    s["status"] = o.code == kExitOk ? "ok" : "failed";
    s["exit_code"] = o.code;
    s["message"] = o.message;
    s["outputs"] = outputs;
    s["summary"] = summary;
    j_["stages"][stage] = s;
    j_["timings"][stage] = seconds;
    save();
  }

  const Json& stage(const std::string& name) const { return j_["stages"][name]; }
  bool has_stage(const std::string& name) const { return j_["stages"].contains(name); }
  const fs::path& dir() const { return dir_; }

 private:
  void save() const { write_file(path_, j_.dump(1) + "\n"); }

  fs::path dir_, path_;
  Json j_ = Json::object();
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::optional<SemialgebraicSet> make_omega(const RunConfig& cfg, int n) {
  if (cfg.omega.empty()) return std::nullopt;
  SemialgebraicSet omega{n, {}};
  for (const auto& g : cfg.omega) omega.constraints.push_back(Polynomial::parse(g, n));
  omega.validate();
  return omega;
}

BoundProgram compile_for(const RunConfig& cfg, const OdeSystem& sys) {
  const Polynomial phi = sys.observable(cfg.observable);
  VAnsatz ansatz;
  ansatz.degree = cfg.degree;
  if (cfg.tail) ansatz.fixed_tail = Polynomial::parse(*cfg.tail, sys.dimension);
  ansatz.tail_scalar_free = cfg.tail_free;
  CompileOptions opt;
  opt.sense = cfg.sense;
  opt.weighted = cfg.weighted;
  opt.prune = cfg.prune;
  opt.ball_radius_squared = cfg.ball_radius_squared;
  BoundProgram prog = compile_bound_problem(sys.f, phi, ansatz, make_omega(cfg, sys.dimension), opt);
  if (cfg.symmetry && sys.symmetry_group && sys.symmetry_group->size() > 1) {
    prog = symmetry_reduce(prog, *sys.symmetry_group);
  }
  return prog;
}

std::string bound_hash(const RunConfig& cfg) {
  std::string text = cfg.stage_text("bound");
  if (cfg.certificate) text += slurp(*cfg.certificate);
  return hex64(fnv1a(text));
}

std::string stage_hash(const RunConfig& cfg, const std::string& stage, const std::optional<std::string>& input) {
  std::string text = bound_hash(cfg) + cfg.stage_text(stage);
  if (input && fs::path(*input).extension() == ".json") {
    // Solve time varies run to run.
    Json j = Json::parse(slurp(*input), nullptr, false);
    if (j.is_object()) j.erase("solve_seconds");
    text += j.dump();
  } else if (input) {
    text += slurp(*input);
  }
  return hex64(fnv1a(text));
}

/// Smallest value of P over random box samples must not fall below a relative tolerance.
std::optional<std::string> verify_indicator(const IndicatorPoly& ip, const SamplerConfig& s) {
  std::mt19937_64 rng(s.rng_seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t n = s.start_box.size();
  double lo = std::numeric_limits<double>::infinity(), scale = 0.0;
  State a(n);
  for (int k = 0; k < 4000; ++k) {
    for (std::size_t i = 0; i < n; ++i) a[i] = s.start_box[i].first + (s.start_box[i].second - s.start_box[i].first) * U(rng);
    double v = ip.value(a);
    lo = std::min(lo, v);
    scale = std::max(scale, std::abs(v));
  }
  if (lo < -1e-6 * (1.0 + scale)) {
    std::ostringstream os;
    os << "indicator polynomial reaches " << lo << " on the start box; the certificate does not verify";
    return os.str();
  }
  return std::nullopt;
}

}  // namespace

StageOutcome run_bound(const RunConfig& cfg, std::ostream& log) {
  Manifest m(cfg);
  const std::string hash = bound_hash(cfg);
  if (auto r = m.reusable("bound", hash)) {
    log << "bound: up to date, skipped\n";
    return *r;
  }
  auto t0 = std::chrono::steady_clock::now();
  OdeSystem sys = make_system(cfg.system, cfg.parameters);
  StageOutcome out;
  Json summary;
  const fs::path cert_path = m.dir() / "certificate.json";
  CertificateMeta meta{sys.name, sys.parameters, cfg.observable, sys.dimension};

  if (cfg.certificate) {
    std::ifstream in(*cfg.certificate);
    if (!in) throw ConfigError("cannot open certificate '" + *cfg.certificate + "'");
    CertificateFile file = read_certificate_json(in);
    if (file.meta.dimension != sys.dimension) throw DimensionMismatch("certificate dimension does not match the system");
    std::ofstream os(cert_path);
    write_certificate_json(os, file.certificate, meta);
    summary = {{"lambda", file.certificate.lambda}, {"sense", sense_name(file.certificate.sense)},
               {"degree", file.certificate.degree}, {"external", true}};
    out.message = "certificate read from " + *cfg.certificate;
    log << "bound: lambda (" << sense_name(file.certificate.sense) << ") = " << file.certificate.lambda << " [supplied]\n";
    m.record("bound", hash, out, Json::array({"certificate.json"}), summary, seconds_since(t0));
    return out;
  }

  BoundProgram prog = compile_for(cfg, sys);
  summary["blocks"] = prog.sdp.block_sizes;
  summary["rows"] = prog.sdp.num_rows();
  if (auto why = size_guard(prog.sdp, cfg.max_block, cfg.max_rows)) {
    out.code = kExitSolverFailure;
    out.message = *why + "; too large for the bundled solver, use `sosupo export-sdpa` and an external solver";
    log << "bound: " << out.message << "\n";
    m.record("bound", hash, out, Json::array(), summary, seconds_since(t0));
    return out;
  }
  SdpSolution sol = solve_sdp(prog.sdp, cfg.solver());
  summary["solver_status"] = to_string(sol.status);
  summary["solver_iterations"] = sol.iterations;
  try {
    BoundCertificate cert = extract_certificate(prog, sol);
    std::ofstream os(cert_path);
    write_certificate_json(os, cert, meta);
    summary["lambda"] = cert.lambda;
    summary["sense"] = sense_name(cert.sense);
    summary["degree"] = cert.degree;
    summary["identity_residual"] = cert.identity_residual_unscaled;
    summary["gram_min_eig"] = cert.gram_min_eig;
    std::ostringstream msg;
    msg.precision(12);
    msg << "lambda (" << sense_name(cert.sense) << " of average " << cfg.observable << ") = " << cert.lambda;
    out.message = msg.str();
    log << "bound: " << out.message << " [" << to_string(sol.status) << ", degree " << cert.degree << "]\n";
    m.record("bound", hash, out, Json::array({"certificate.json"}), summary, seconds_since(t0));
  } catch (const CertificateError& e) {
    out.code = kExitSolverFailure;
    out.message = std::string("solver stage: ") + e.what() + " (" + to_string(sol.status) + ": " + sol.message + ")";
    log << "bound: " << out.message << "\n";
    m.record("bound", hash, out, Json::array(), summary, seconds_since(t0));
  }
  return out;
}

StageOutcome run_localize(const RunConfig& cfg, std::ostream& log, const std::optional<std::string>& certificate_path) {
  Manifest m(cfg);
  const std::string cert_file = certificate_path ? *certificate_path : (m.dir() / "certificate.json").string();
  if (!fs::exists(cert_file)) throw ConfigError("localize: certificate '" + cert_file + "' not found; run bound first");
  const std::string hash = stage_hash(cfg, "localize", cert_file);
  if (auto r = m.reusable("localize", hash)) {
    log << "localize: up to date, skipped\n";
    return *r;
  }
  auto t0 = std::chrono::steady_clock::now();
  OdeSystem sys = make_system(cfg.system, cfg.parameters);
  std::ifstream in(cert_file);
  CertificateFile file = read_certificate_json(in);
  if (file.meta.dimension != sys.dimension) throw DimensionMismatch("certificate dimension does not match the system");
  const std::string obs = file.meta.observable.empty() ? cfg.observable : file.meta.observable;
  const Polynomial phi = sys.observable(obs);
  IndicatorPoly ip = build_indicator_poly(file.certificate, sys.f, phi);
  SamplerConfig sampler = cfg.sampler(sys.dimension);
  StageOutcome out;
  Json summary;
  summary["lambda"] = file.certificate.lambda;
  summary["degenerate"] = ip.degenerate;

  if (auto bad = verify_indicator(ip, sampler)) {
    out.code = kExitSolverFailure;
    out.message = *bad;
    log << "localize: " << out.message << "\n";
    m.record("localize", hash, out, Json::array(), summary, seconds_since(t0));
    return out;
  }

  std::vector<double> ladder = cfg.epsilon;
  if (ladder.empty()) {
    std::optional<double> ref = cfg.reference_average;
    if (!ref && cfg.reference_time) {
      State a0 = cfg.reference_start;
      if (a0.empty()) {
        a0.resize(static_cast<std::size_t>(sys.dimension));
        for (std::size_t i = 0; i < a0.size(); ++i) {
          a0[i] = sampler.start_box[i].first + 0.61803398875 * (sampler.start_box[i].second - sampler.start_box[i].first);
        }
      }
      ref = time_average(sys, phi, a0, *cfg.reference_time);
    }
    if (!ref) throw ConfigError("[localize] needs epsilon, reference_average or reference_time");
    ladder = {default_epsilon(file.certificate.lambda, *ref)};
    summary["reference_average"] = *ref;
  }
  std::sort(ladder.begin(), ladder.end());
  ip.epsilon_list = ladder;

  PointCloud cloud = harvest(ip, sampler, ladder.back());
  summary["runs"] = cloud.stats.runs;
  summary["iterates"] = cloud.stats.iterates;
  summary["failed_runs"] = cloud.stats.failed_runs;
  summary["min_P"] = cloud.stats.min_P;
  Json rungs = Json::array(), outputs = Json::array();
  std::string chosen;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    PointCloud sub = cloud;
    sub.epsilon = ladder[k];
    sub.points.clear();
    for (const auto& p : cloud.points) {
      if (p.P <= ladder[k]) sub.points.push_back(p);
    }
    sub.stats.accepted = static_cast<long>(sub.points.size());
    sub.stats.max_accepted_P = 0.0;
    for (const auto& p : sub.points) sub.stats.max_accepted_P = std::max(sub.stats.max_accepted_P, p.P);
    const std::string base = "cloud_" + std::to_string(k);
    {
      std::ofstream csv(m.dir() / (base + ".csv"), std::ios::binary);
      sub.write_csv(csv);
      std::ofstream js(m.dir() / (base + ".json"), std::ios::binary);
      sub.write_json(js);
    }
    outputs.push_back(base + ".csv");
    outputs.push_back(base + ".json");
    rungs.push_back({{"epsilon", ladder[k]}, {"points", sub.points.size()}, {"file", base + ".csv"}});
    if (chosen.empty() && !sub.points.empty()) chosen = base + ".csv";
    log << "localize: epsilon " << ladder[k] << " -> " << sub.points.size() << " points\n";
  }
  summary["rungs"] = rungs;
  summary["cloud"] = chosen;
  if (!cloud.warning.empty()) {
    summary["warning"] = cloud.warning;
    log << "localize: warning: " << cloud.warning << "\n";
  }
  if (chosen.empty()) {
    out.code = kExitEmptyCloud;
    out.message = cloud.warning;
  } else {
    out.message = std::to_string(cloud.points.size()) + " points";
  }
  m.record("localize", hash, out, outputs, summary, seconds_since(t0));
  return out;
}

StageOutcome run_converge(const RunConfig& cfg, std::ostream& log, const std::optional<std::string>& cloud_path) {
  Manifest m(cfg);
  std::string cloud_file;
  if (cloud_path) {
    cloud_file = *cloud_path;
  } else {
    if (!m.has_stage("localize")) throw ConfigError("converge: no cloud recorded; run localize first");
    const std::string chosen = m.stage("localize")["summary"].value("cloud", std::string());
    if (chosen.empty()) {
      log << "converge: the recorded cloud is empty\n";
      return {kExitEmptyCloud, false, "empty cloud"};
    }
    cloud_file = (m.dir() / chosen).string();
  }
  const std::string hash = stage_hash(cfg, "converge", cloud_file);
  if (auto r = m.reusable("converge", hash)) {
    log << "converge: up to date, skipped\n";
    return *r;
  }
  auto t0 = std::chrono::steady_clock::now();
  OdeSystem sys = make_system(cfg.system, cfg.parameters);
  std::ifstream in(cloud_file);
  if (!in) throw ConfigError("cannot open cloud '" + cloud_file + "'");
  PointCloud cloud = PointCloud::read_csv(in);
  StageOutcome out;
  Json summary;
  if (cloud.dimension != sys.dimension) throw DimensionMismatch("cloud dimension does not match the system");
  if (cloud.empty()) {
    out.code = kExitEmptyCloud;
    out.message = "empty cloud";
    m.record("converge", hash, out, Json::array(), summary, seconds_since(t0));
    return out;
  }

  std::optional<double> lambda;
  std::optional<BoundSense> sense;
  const fs::path cert_path = m.dir() / "certificate.json";
  if (fs::exists(cert_path)) {
    std::ifstream cin(cert_path);
    auto file = read_certificate_json(cin);
    lambda = file.certificate.lambda;
    sense = file.certificate.sense;
  }

  RecurrenceOptions ropt;
  ropt.max_starts = static_cast<std::size_t>(cfg.max_starts);
  auto guesses = recurrence_guesses(sys, cloud, cfg.horizon, cfg.near_tol, ropt);
  summary["guesses"] = guesses.size();
  ShootingSettings shoot = cfg.shooting();
  const Polynomial phi = sys.observable(cfg.observable);

  std::vector<PeriodicOrbit> found;
  std::vector<PeriodicOrbit> family;  // found orbits and their images, for deduplication
  double best_residual = std::numeric_limits<double>::infinity();
  int failures = 0, equilibria = 0;
  Json orbits = Json::array(), outputs = Json::array();
  for (const auto& g : guesses) {
    if (static_cast<int>(found.size()) >= cfg.max_orbits) break;
    PeriodicOrbit orbit = close_orbit(sys, g, shoot);
    best_residual = std::min(best_residual, orbit.closure_residual);
    if (orbit.status == OrbitStatus::converged_to_equilibrium) {
      ++equilibria;
      continue;
    }
    if (!orbit.converged()) {
      ++failures;
      continue;
    }
    bool seen = false;
    for (const auto& o : family) seen = seen || distance_to_orbit(o, orbit.a0) < 1e-6;
    if (seen) continue;
    orbit.floquet = floquet_multipliers(sys, orbit);
    orbit.averages[cfg.observable] = orbit_average(sys, orbit, phi);
    for (const auto& [name, p] : sys.observables) orbit.averages[name] = orbit_average(sys, orbit, p);
    std::vector<PeriodicOrbit> images =
        cfg.images && sys.symmetry_group ? symmetry_images(sys, orbit, *sys.symmetry_group) : std::vector<PeriodicOrbit>{orbit};
    const std::size_t k = found.size();
    std::ostringstream js;
    orbit.write_json(js);
    Json oj = Json::parse(js.str());
    Json ij = Json::array();
    for (std::size_t i = 1; i < images.size(); ++i) {
      ij.push_back({{"a0", images[i].a0}, {"closure_residual", images[i].closure_residual}});
    }
    oj["images"] = ij;
    const std::string csv = "orbit_" + std::to_string(k) + ".csv";
    {
      std::ofstream os(m.dir() / csv, std::ios::binary);
      orbit.write_samples_csv(os);
    }
    oj["samples_file"] = csv;
    outputs.push_back(csv);
    orbits.push_back(oj);
    const double avg = orbit.averages[cfg.observable];
    log.precision(12);
    log << "converge: orbit " << k << " T = " << orbit.T << " residual " << orbit.closure_residual << " average "
        << cfg.observable << " = " << avg;
    if (lambda) log << " vs bound " << *lambda << " (" << sense_name(*sense) << ")";
    log << ", " << images.size() << " symmetry image(s)\n";
    family.insert(family.end(), images.begin(), images.end());
    found.push_back(std::move(orbit));
  }
  Json archive;
  archive["schema"] = "sosupo-orbits/1";
  archive["system"] = sys.name;
  archive["parameters"] = sys.parameters;
  archive["observable"] = cfg.observable;
  if (lambda) {
    archive["bound"] = *lambda;
    archive["sense"] = sense_name(*sense);
  }
  archive["orbits"] = orbits;
  write_file(m.dir() / "orbits.json", archive.dump(1) + "\n");
  outputs.push_back("orbits.json");
  summary["orbits"] = found.size();
  summary["failures"] = failures;
  summary["equilibria"] = equilibria;
  if (std::isfinite(best_residual)) summary["best_residual"] = best_residual;
  if (found.empty()) {
    out.code = kExitNoConvergence;
    std::ostringstream os;
    os << "all " << guesses.size() << " guesses failed";
    if (std::isfinite(best_residual)) os << " (best residual " << best_residual << ")";
    out.message = os.str();
    log << "converge: " << out.message << "\n";
  } else {
    out.message = std::to_string(found.size()) + " orbit(s)";
  }
  m.record("converge", hash, out, outputs, summary, seconds_since(t0));
  return out;
}

StageOutcome run_pipeline(const RunConfig& cfg, std::ostream& log) {
  StageOutcome b = run_bound(cfg, log);
  if (b.code != kExitOk) return b;
  StageOutcome l = run_localize(cfg, log);
  if (l.code != kExitOk) return l;
  StageOutcome c = run_converge(cfg, log);
  c.skipped = c.skipped && l.skipped && b.skipped;
  return c;
}

std::size_t export_bound_sdpa(const RunConfig& cfg, std::ostream& out) {
  OdeSystem sys = make_system(cfg.system, cfg.parameters);
  BoundProgram prog = compile_for(cfg, sys);
  export_sdpa(prog.sdp, out);
  return prog.sdp.num_rows();
}

std::string manifest_hash(const std::string& out_dir) {
  Json j = Json::parse(slurp(fs::path(out_dir) / "manifest.json"));
  j.erase("timings");
  return hex64(fnv1a(j.dump()));
}

}  // namespace sosupo
