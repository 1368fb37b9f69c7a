#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sosupo/localize.hpp"
#include "sosupo/sdp.hpp"
#include "sosupo/sos.hpp"
#include "sosupo/upo.hpp"

namespace sosupo {

/// One file drives bound, localize and converge. INI text: [section] headers, key = value,
/// '#' or ';' comments. Lists are comma separated, polynomial lists ';' separated, intervals lo:hi.
struct RunConfig {
  // [run]
  std::string out = "run";
  std::uint64_t seed = 1;

  // [system]
  std::string system = "vanderpol";
  std::map<std::string, double> parameters;

  // [bound]
  std::string observable = "x2";
  BoundSense sense = BoundSense::upper_bound_of_max;
  int degree = 4;
  bool symmetry = true;
  bool weighted = false;
  bool prune = false;
  std::vector<std::string> omega;
  std::optional<double> ball_radius_squared;
  std::optional<std::string> tail;
  bool tail_free = false;
  std::optional<std::string> certificate;  // use this file instead of solving
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iterations = 200;
  int max_block = 400;
  int max_rows = 20000;

  // [localize]
  std::vector<std::pair<double, double>> box;  // one entry broadcasts to every coordinate
  int n_starts = 100;
  double step_tol = 1e-6;
  double grad_tol = 1e-6;
  std::vector<double> grad_tol_ladder;
  std::vector<double> epsilon;  // ladder; empty derives one from the reference average
  std::optional<double> beta;
  KeepPolicy keep = KeepPolicy::final_points;
  int threads = 0;
  int max_iters = 500;
  std::optional<double> reference_average;
  std::optional<double> reference_time;  // simulate this long for the reference average
  std::vector<double> reference_start;

  // [converge]
  double horizon = 50.0;
  double near_tol = 0.1;
  int max_starts = 50;
  int max_orbits = 1;
  double shooting_tol = 1e-9;
  int shooting_iterations = 50;
  int samples = 10000;
  bool images = true;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);
  std::string to_ini() const;

  /// Canonical text of the sections a stage depends on.
  std::string stage_text(const std::string& stage) const;

  SamplerConfig sampler(int dimension) const;
  ShootingSettings shooting() const;
  SolverSettings solver() const;

  bool operator==(const RunConfig&) const = default;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace sosupo
