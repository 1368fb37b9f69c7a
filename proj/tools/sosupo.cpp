// sosupo: bound -> localize -> converge from one config file.

#include <exception>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sosupo/dynamics.hpp"
#include "sosupo/errors.hpp"
#include "sosupo/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<double> epsilon;
  std::optional<int> degree;
  std::optional<std::string> symmetry;
  std::optional<std::string> weighted;
};

sosupo::RunConfig resolve(const Overrides& o) {
  sosupo::RunConfig cfg = o.config.empty() ? sosupo::RunConfig{} : sosupo::RunConfig::load(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (!o.epsilon.empty()) cfg.epsilon = o.epsilon;
  if (o.degree) cfg.degree = *o.degree;
  if (o.symmetry) cfg.symmetry = *o.symmetry == "on";
  if (o.weighted) cfg.weighted = *o.weighted == "on";
  return cfg;
}

void report(const sosupo::StageOutcome& r) {
  if (r.code != sosupo::kExitOk && !r.message.empty()) std::cerr << "sosupo: " << r.message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounds on extremal time averages of polynomial ODEs and localization of extremal periodic orbits"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "random seed for start sampling");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--epsilon", o.epsilon, "sublevel thresholds (ladder)")->delimiter(',');
  app.add_option("--degree", o.degree, "degree of V")->check(CLI::PositiveNumber);
  app.add_option("--symmetry", o.symmetry, "symmetry reduction")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--weighted", o.weighted, "weighted S-procedure on omega")->check(CLI::IsMember({"on", "off"}));

  auto* bound = app.add_subcommand("bound", "solve the SOS program and write certificate.json");
  auto* localize = app.add_subcommand("localize", "harvest sublevel-set points into cloud files");
  std::optional<std::string> certificate;
  localize->add_option("--certificate", certificate, "certificate JSON (default: <out>/certificate.json)")
      ->check(CLI::ExistingFile);
  auto* converge = app.add_subcommand("converge", "converge periodic orbits from the cloud");
  std::optional<std::string> cloud;
  converge->add_option("--cloud", cloud, "cloud CSV (default: the recorded cloud)")->check(CLI::ExistingFile);
  auto* pipeline = app.add_subcommand("pipeline", "bound, localize and converge");
  auto* sdpa = app.add_subcommand("export-sdpa", "write the bound SDP in SDPA sparse format");
  std::string sdpa_out;
  sdpa->add_option("--output,-o", sdpa_out, "output file (default: <out>/bound.dat-s)");
  auto* systems = app.add_subcommand("systems", "model registry");
  systems->require_subcommand(1);
  auto* list = systems->add_subcommand("list", "list built-in systems");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& s : sosupo::list_systems()) {
        std::cout << s.name << " (n = " << s.dimension << ")";
        for (const auto& [k, v] : s.defaults) std::cout << " " << k << "=" << v;
        std::cout << "  " << s.description << "\n";
      }
      return sosupo::kExitOk;
    }
    const sosupo::RunConfig cfg = resolve(o);
    sosupo::StageOutcome r;
    if (bound->parsed()) {
      r = sosupo::run_bound(cfg, std::cout);
    } else if (localize->parsed()) {
      r = sosupo::run_localize(cfg, std::cout, certificate);
    } else if (converge->parsed()) {
      r = sosupo::run_converge(cfg, std::cout, cloud);
    } else if (pipeline->parsed()) {
      r = sosupo::run_pipeline(cfg, std::cout);
      std::cout << "manifest " << sosupo::manifest_hash(cfg.out) << (r.skipped ? " (nothing recomputed)" : "") << "\n";
    } else if (sdpa->parsed()) {
      std::filesystem::create_directories(cfg.out);
      const std::string path = sdpa_out.empty() ? cfg.out + "/bound.dat-s" : sdpa_out;
      std::ofstream os(path);
      if (!os) throw sosupo::ConfigError("cannot write '" + path + "'");
      std::size_t rows = sosupo::export_bound_sdpa(cfg, os);
      std::cout << "export-sdpa: " << rows << " constraints written to " << path << "\n";
    }
    report(r);
    return r.code;
  } catch (const sosupo::ConfigError& e) {
    std::cerr << "sosupo: config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sosupo: " << e.what() << "\n";
    return 1;
  }
}
