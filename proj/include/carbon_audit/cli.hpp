#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace carbon_audit::cli {

// Exit status contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

// Environment variable capping concurrently audited sites.
inline constexpr const char* kThreadsEnv = "CARBON_AUDIT_THREADS";

/// Entry point for `carbon-audit {audit|allometry|match|render} [flags]`.
/// `args` excludes the program name. Usage errors and fatal errors return
/// kExitFatal with a message on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Help text of one subcommand ("" for the top level).
std::string help_text(const std::string& subcommand);

// Long flag names accepted by a subcommand, e.g. "--raster".
std::vector<std::string> accepted_flags(const std::string& subcommand);

} // namespace carbon_audit::cli
