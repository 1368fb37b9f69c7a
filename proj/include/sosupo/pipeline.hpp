#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "sosupo/config.hpp"

namespace sosupo {

enum ExitCode : int { kExitOk = 0, kExitEmptyCloud = 2, kExitNoConvergence = 3, kExitSolverFailure = 4 };

struct StageOutcome {
  int code = kExitOk;
  bool skipped = false;
  std::string message;
};

/// Stages read and write files under cfg.out and record themselves in cfg.out/manifest.json.
/// A stage whose recorded input hash matches and whose outputs exist is skipped.
StageOutcome run_bound(const RunConfig& cfg, std::ostream& log);
StageOutcome run_localize(const RunConfig& cfg, std::ostream& log,
                          const std::optional<std::string>& certificate_path = std::nullopt);
StageOutcome run_converge(const RunConfig& cfg, std::ostream& log,
                          const std::optional<std::string>& cloud_path = std::nullopt);
/// bound, localize, converge; halts at the first stage with a nonzero code.
StageOutcome run_pipeline(const RunConfig& cfg, std::ostream& log);

/// Compiles (and reduces, when enabled) the bound problem and writes it in SDPA sparse format.
/// No size guard applies. Returns the number of constraint rows.
std::size_t export_bound_sdpa(const RunConfig& cfg, std::ostream& out);

/// Hash of manifest.json with the timings object removed.
std::string manifest_hash(const std::string& out_dir);

}  // namespace sosupo
