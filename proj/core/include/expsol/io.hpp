#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "expsol/analysis.hpp"
#include "expsol/shooting.hpp"
#include "expsol/subsystem.hpp"

namespace expsol {

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kArtifactVersion = "1.0.0";

// Parsed run setup: problem block plus exactly one of seed / target block.
struct RunSetup {
  ProblemSpec spec;
  std::optional<SeedParams> seed;   // integrate / sweep / verify
  std::optional<ConeSpec> target;   // shoot
  RunConfig run;
  double shoot_tol = 1e-4;
  std::vector<double> sweep_grid;   // C values for the sweep command
  std::string out_dir;              // optional output directory override
  int sample_stride = 1;
};

// Loads and validates a JSON config. Throws std::invalid_argument naming the
// offending field on any validation failure.
RunSetup load_run_setup(const std::filesystem::path& config_path);

// SHA-256 of a file's bytes, lowercase hex. Throws std::runtime_error on I/O
// failure.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const void* data, std::size_t size);

// trajectory.csv: columns
//   s,t,L,X1..Xr,Y1..Yr,u,S1,S2,Rcal,Z,conservation_residual
// one row per sample, 17 significant digits, header row mandatory.
void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryRecord& record);

// summary.json: classification, sigma[], sigma_uncertainty[], refined[],
// scal_limit, cone_scal_coeff, C, fbar[], seed t0, terminal event, flags[],
// schema_version.
void write_summary_json(const std::filesystem::path& path,
                        const TrajectoryRecord& record,
                        const AsymptoticReport& report);

// bracket.csv: one row (C, sigma1, uncertainty) per solver evaluation.
void write_bracket_csv(const std::filesystem::path& path,
                       const std::vector<BracketPoint>& bracket);

// sweep.csv: one row (C, sigma_1..r, scal_limit, cone_scal_coeff, flags) per
// grid point, in grid order.
void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows, int r);

// subsystem trajectory: columns s, X, Y, X/Y^2, Rcal_sub.
void write_subsystem_csv(const std::filesystem::path& path,
                         const SubTrajectory& trajectory);

// manifest.json: config echo, artifact version, timestamps, one entry per
// output file with its SHA-256 digest, terminal status string.
void write_manifest_json(const std::filesystem::path& path,
                         const std::filesystem::path& config_echo,
                         const std::vector<std::filesystem::path>& outputs,
                         const std::string& status,
                         const std::string& started_iso8601,
                         const std::string& finished_iso8601);

std::string now_iso8601();

// Command bodies behind the CLI. Each returns the process exit code:
// 0 ok / 1 error / 2 flagged invariants / 3 shooting failure.
// `out_root` resolves as: explicit --out, else config out_dir, else the
// EXPSOL_OUT_ROOT environment variable, else "runs/" under the cwd.
int cmd_integrate(const RunSetup& setup, const std::filesystem::path& config,
                  const std::string& out_override);
int cmd_shoot(const RunSetup& setup, const std::filesystem::path& config,
              const std::string& out_override);
int cmd_sweep(const RunSetup& setup, const std::filesystem::path& config,
              const std::string& out_override, int workers);
int cmd_subsystem(int d, double offset, const std::string& out_override);
int cmd_verify(const RunSetup& setup);

}  // namespace expsol
