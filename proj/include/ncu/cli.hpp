#ifndef NCU_CLI_HPP_
#define NCU_CLI_HPP_

#include "ncu/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace ncu
{

enum ExitCode : int
{
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitConvergence = 3,
  kExitCps = 4,
};

/// Environment variable naming the output directory when --out is absent.
inline constexpr const char * kOutDirEnv = "NCU_OUT_DIR";

/// Tag carried by every JSON report.
inline constexpr const char * kReportSchema = "ncu-report/1";

struct RunContext
{
  std::filesystem::path out_dir = ".";
  std::string profile = "default";
  std::uint64_t seed = 0;
};

// Each command writes its files into ctx.out_dir and returns an exit code.
int cmd_envelope(const ProblemConfig & cfg, const RunContext & ctx);
int cmd_conjugate(const ProblemConfig & cfg, const RunContext & ctx);
int cmd_eae(const ProblemConfig & cfg, const RunContext & ctx);
int cmd_envelope_check(const ProblemConfig & cfg, const RunContext & ctx);
int cmd_solve(const ProblemConfig & cfg, const RunContext & ctx);
int cmd_curves(const ProblemConfig & cfg, const RunContext & ctx);
int cmd_cps_check(const ProblemConfig & cfg, const RunContext & ctx);
int cmd_liquidate(const ProblemConfig & cfg, const RunContext & ctx);

/// Full command line: `<subcommand> --config <path> [--out <dir>]
/// [--tolerance-profile <name>] [--seed <int>]`. Never throws.
int run_cli(int argc, char ** argv);

}  // namespace ncu

#endif  // NCU_CLI_HPP_
