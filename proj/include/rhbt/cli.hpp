#pragma once

#include <ostream>

namespace rhbt::cli {

enum ExitCode : int {
    ok = 0,
    usage_error = 2,
    spec_invalid = 3,
    io_error = 4,
    analysis_undefined = 5,
};

/// Environment variable naming the directory for outputs without an explicit path.
inline constexpr const char* kOutputDirEnv = "RHBT_OUTPUT_DIR";

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rhbt::cli
