#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace patcls::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Runs the `patcls` command line. `args` includes the program name. Errors
/// are reported as one `patcls: error: ...` line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace patcls::cli
