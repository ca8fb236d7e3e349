#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace khgt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command: prepare, train, evaluate, recommend, export-attention,
/// gradcheck or synth. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace khgt::cli
