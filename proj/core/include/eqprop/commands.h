#pragma once

#include <ostream>

#include "eqprop/config.h"

namespace eqprop {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitNumeric = 4,
};

// Runs one command. Errors are reported on `err` prefixed with the command
// name and mapped to an exit code; nothing is thrown.
//   train:            metrics.csv and a checkpoint per epoch in output_dir
//   eval:             error rate of the checkpoint on eval_split
//   gradcheck:        oracle suite, one PASS/FAIL line per check
//   stochastic-check: quadrature and Langevin suite, same format
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

// Exit code for an exception thrown by the library.
int exit_code_for(const std::exception& e);

}  // namespace eqprop
