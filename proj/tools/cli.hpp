#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace psiproc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Parses and executes one command line (args[0] is the program name).
// Progress and summaries go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace psiproc::cli
