#pragma once

#include <iosfwd>
#include <string>

#include "hetdeconv/error_models.hpp"
#include "hetdeconv/estimators.hpp"

namespace hetdeconv::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidationFailed = 1,
    kExitUsage = 2,
    kExitRuntime = 3,
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Reads per-row error laws from a CSV with columns `family` and `parameter`
/// (`variance` is accepted as an alias). Throws ConfigError on schema problems.
ErrorEnsemble read_error_spec(const std::string& path);

/// Reads observations (columns x, w, y) and pairs them with `ensemble`.
/// Throws ConfigError on schema problems, including a row count mismatch.
Sample read_sample(const std::string& path, const ErrorEnsemble& ensemble);

}  // namespace hetdeconv::cli
