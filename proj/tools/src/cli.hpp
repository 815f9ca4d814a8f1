// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace vat::cli {

enum ExitCode : int { kOk = 0, kEvalErrors = 1, kUsage = 2, kInterrupted = 130 };

/// Runs the `vat` command line. Output goes to `out`, diagnostics to `err`.
/// `cancel` is polled between tasks (set by the SIGINT handler in main).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::atomic<bool>* cancel = nullptr);

}  // namespace vat::cli
