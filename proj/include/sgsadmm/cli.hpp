#pragma once

namespace sgsadmm {

enum ExitCode : int {
  kExitOk = 0,
  kExitNotConverged = 1,
  kExitUsage = 2,
  kExitDiverged = 3,
  kExitContract = 4,
  kExitFailure = 5,  // I/O or numerical failure
};

/// Entry point of the command-line tool; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace sgsadmm
