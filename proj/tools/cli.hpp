#pragma once

#include <iosfwd>

namespace ltnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `ltnn` tool:
///
///   ltnn <gen-data|train|eval|synth|cost> [--config=FILE] [--key=value ...]
///
/// Settings come from defaults, then FILE, then the command line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ltnn::cli
