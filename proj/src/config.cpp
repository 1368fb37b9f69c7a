#include "sosupo/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sosupo/errors.hpp"

namespace sosupo {

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Reader {
  std::string where;

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where + ": " + msg); }

  double real(const std::string& v) const {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &pos);
    } catch (const std::exception&) {
      fail("expected a number, got '" + v + "'");
    }
    if (pos != v.size() || !std::isfinite(d)) fail("expected a number, got '" + v + "'");
    return d;
  }
  int integer(const std::string& v) const {
    double d = real(v);
    if (d != std::floor(d) || std::abs(d) > 2e9) fail("expected an integer, got '" + v + "'");
    return static_cast<int>(d);
  }
  bool flag(const std::string& v) const {
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    fail("expected on or off, got '" + v + "'");
  }
  std::vector<double> reals(const std::string& v) const {
    std::vector<double> out;
    for (const auto& s : split(v, ',')) out.push_back(real(s));
    return out;
  }
  std::pair<double, double> interval(const std::string& v) const {
    auto colon = v.find(':');
    if (colon == std::string::npos) fail("expected lo:hi, got '" + v + "'");
    double lo = real(trim(v.substr(0, colon))), hi = real(trim(v.substr(colon + 1)));
    if (!(lo <= hi)) fail("empty interval '" + v + "'");
    return {lo, hi};
  }
};

const char* keep_name(KeepPolicy k) { return k == KeepPolicy::full_trails ? "full_trails" : "final_points"; }

}  // namespace

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    Reader r{"line " + std::to_string(lineno)};
    if (t.front() == '[') {
      if (t.back() != ']') r.fail("unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section != "run" && section != "system" && section != "bound" && section != "localize" && section != "converge") {
        r.fail("unknown section [" + section + "]");
      }
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) r.fail("expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string v = trim(t.substr(eq + 1));
    if (section.empty()) r.fail("key '" + key + "' outside a section");
    r.where += " [" + section + "] " + key;
    if (!seen.insert(section + "." + key).second) r.fail("duplicate key");

    if (section == "run") {
      if (key == "out") c.out = v;
      else if (key == "seed") c.seed = static_cast<std::uint64_t>(r.integer(v));
      else r.fail("unknown key");
    } else if (section == "system") {
      if (key == "name") c.system = v;
      else c.parameters[key] = r.real(v);
    } else if (section == "bound") {
      if (key == "observable") c.observable = v;
      else if (key == "sense") {
        if (v == "max") c.sense = BoundSense::upper_bound_of_max;
        else if (v == "min") c.sense = BoundSense::lower_bound_of_min;
        else r.fail("expected max or min");
      } else if (key == "degree") c.degree = r.integer(v);
      else if (key == "symmetry") c.symmetry = r.flag(v);
      else if (key == "weighted") c.weighted = r.flag(v);
      else if (key == "prune") c.prune = r.flag(v);
      else if (key == "omega") c.omega = split(v, ';');
      else if (key == "ball_radius_squared") c.ball_radius_squared = r.real(v);
      else if (key == "tail") c.tail = v;
      else if (key == "tail_free") c.tail_free = r.flag(v);
      else if (key == "certificate") c.certificate = v;
      else if (key == "gap_tol") c.gap_tol = r.real(v);
      else if (key == "feas_tol") c.feas_tol = r.real(v);
      else if (key == "max_iterations") c.max_iterations = r.integer(v);
      else if (key == "max_block") c.max_block = r.integer(v);
      else if (key == "max_rows") c.max_rows = r.integer(v);
      else r.fail("unknown key");
    } else if (section == "localize") {
      if (key == "box") {
        c.box.clear();
        for (const auto& s : split(v, ',')) c.box.push_back(r.interval(s));
      } else if (key == "n_starts") c.n_starts = r.integer(v);
      else if (key == "step_tol") c.step_tol = r.real(v);
      else if (key == "grad_tol") c.grad_tol = r.real(v);
      else if (key == "grad_tol_ladder") c.grad_tol_ladder = r.reals(v);
      else if (key == "epsilon") c.epsilon = r.reals(v);
      else if (key == "beta") c.beta = r.real(v);
      else if (key == "keep") {
        if (v == "final_points") c.keep = KeepPolicy::final_points;
        else if (v == "full_trails") c.keep = KeepPolicy::full_trails;
        else r.fail("expected final_points or full_trails");
      } else if (key == "threads") c.threads = r.integer(v);
      else if (key == "max_iters") c.max_iters = r.integer(v);
      else if (key == "reference_average") c.reference_average = r.real(v);
      else if (key == "reference_time") c.reference_time = r.real(v);
      else if (key == "reference_start") c.reference_start = r.reals(v);
      else r.fail("unknown key");
    } else if (section == "converge") {
      if (key == "horizon") c.horizon = r.real(v);
      else if (key == "near_tol") c.near_tol = r.real(v);
      else if (key == "max_starts") c.max_starts = r.integer(v);
      else if (key == "max_orbits") c.max_orbits = r.integer(v);
      else if (key == "tolerance") c.shooting_tol = r.real(v);
      else if (key == "max_iterations") c.shooting_iterations = r.integer(v);
      else if (key == "samples") c.samples = r.integer(v);
      else if (key == "images") c.images = r.flag(v);
      else r.fail("unknown key");
    }
  }
  if (c.degree < 1) throw ConfigError("[bound] degree must be at least 1");
  if (c.n_starts < 0 || c.max_starts < 0 || c.max_orbits < 1 || c.samples < 16) {
    throw ConfigError("count settings out of range");
  }
  for (double e : c.epsilon) {
    if (!(e > 0)) throw ConfigError("[localize] epsilon values must be positive");
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::stage_text(const std::string& stage) const {
  std::ostringstream os;
  os << "[system]\nname = " << system << "\n";
  for (const auto& [k, v] : parameters) os << k << " = " << num(v) << "\n";
  os << "\n[bound]\n"
     << "observable = " << observable << "\n"
     << "sense = " << (sense == BoundSense::upper_bound_of_max ? "max" : "min") << "\n"
     << "degree = " << degree << "\n"
     << "symmetry = " << (symmetry ? "on" : "off") << "\n"
     << "weighted = " << (weighted ? "on" : "off") << "\n"
     << "prune = " << (prune ? "on" : "off") << "\n";
  if (!omega.empty()) {
    os << "omega = ";
    for (std::size_t i = 0; i < omega.size(); ++i) os << (i ? "; " : "") << omega[i];
    os << "\n";
  }
  if (ball_radius_squared) os << "ball_radius_squared = " << num(*ball_radius_squared) << "\n";
  if (tail) os << "tail = " << *tail << "\n";
  os << "tail_free = " << (tail_free ? "on" : "off") << "\n";
  if (certificate) os << "certificate = " << *certificate << "\n";
  os << "gap_tol = " << num(gap_tol) << "\n"
     << "feas_tol = " << num(feas_tol) << "\n"
     << "max_iterations = " << max_iterations << "\n"
     << "max_block = " << max_block << "\n"
     << "max_rows = " << max_rows << "\n";
  if (stage == "bound") return os.str();

  auto list = [&](const char* key, const std::vector<double>& v) {
    if (v.empty()) return;
    os << key << " = ";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << num(v[i]);
    os << "\n";
  };
  os << "\n[localize]\n";
  if (!box.empty()) {
    os << "box = ";
    for (std::size_t i = 0; i < box.size(); ++i) os << (i ? ", " : "") << num(box[i].first) << ":" << num(box[i].second);
    os << "\n";
  }
  os << "n_starts = " << n_starts << "\n"
     << "step_tol = " << num(step_tol) << "\n"
     << "grad_tol = " << num(grad_tol) << "\n";
  list("grad_tol_ladder", grad_tol_ladder);
  list("epsilon", epsilon);
  if (beta) os << "beta = " << num(*beta) << "\n";
  os << "keep = " << keep_name(keep) << "\n"
     << "threads = " << threads << "\n"
     << "max_iters = " << max_iters << "\n";
  if (reference_average) os << "reference_average = " << num(*reference_average) << "\n";
  if (reference_time) os << "reference_time = " << num(*reference_time) << "\n";
  list("reference_start", reference_start);
  // The seed only affects sampling; the output directory affects nothing.
  os << "seed = " << seed << "\n";
  if (stage == "localize") return os.str();

  os << "\n[converge]\n"
     << "horizon = " << num(horizon) << "\n"
     << "near_tol = " << num(near_tol) << "\n"
     << "max_starts = " << max_starts << "\n"
     << "max_orbits = " << max_orbits << "\n"
     << "tolerance = " << num(shooting_tol) << "\n"
     << "max_iterations = " << shooting_iterations << "\n"
     << "samples = " << samples << "\n"
     << "images = " << (images ? "on" : "off") << "\n";
  return os.str();
}

std::string RunConfig::to_ini() const {
  std::string body = stage_text("converge");
  // stage_text carries the seed inside [localize]; the printed form keeps it under [run].
  const std::string seed_line = "seed = " + std::to_string(seed) + "\n";
  body.erase(body.find(seed_line), seed_line.size());
  return "[run]\nout = " + out + "\n" + seed_line + "\n" + body;
}

SamplerConfig RunConfig::sampler(int dimension) const {
  SamplerConfig s;
  if (box.empty()) {
    // The unit ball absorbs every nine-mode trajectory.
    if (system != "moehlis9") throw ConfigError("[localize] box is required for system '" + system + "'");
    s.start_box.assign(static_cast<std::size_t>(dimension), {-1.0, 1.0});
  } else if (box.size() == 1) {
    s.start_box.assign(static_cast<std::size_t>(dimension), box.front());
  } else {
    s.start_box = box;
  }
  s.n_starts = n_starts;
  s.rng_seed = seed;
  s.step_tol = step_tol;
  s.grad_tol = grad_tol;
  s.grad_tol_ladder = grad_tol_ladder;
  s.max_iters = max_iters;
  s.beta = beta;
  s.keep = keep;
  s.threads = threads;
  s.validate(dimension);
  return s;
}

ShootingSettings RunConfig::shooting() const {
  ShootingSettings s;
  s.tolerance = shooting_tol;
  s.max_iterations = shooting_iterations;
  s.samples = samples;
  return s;
}

SolverSettings RunConfig::solver() const {
  SolverSettings s;
  s.gap_tol = gap_tol;
  s.feas_tol = feas_tol;
  s.max_iterations = max_iterations;
  s.validate();
  return s;
}

}  // namespace sosupo
