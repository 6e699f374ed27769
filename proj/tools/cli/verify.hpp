#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "cli/run.hpp"

namespace kacflow::cli {

struct VerifyOptions {
    std::uint64_t seed = 0;
    std::size_t samples = 100'000;
    unsigned workers = 1;
    /// Config whose flow and sets are checked as well.
    std::optional<std::string> config_path;
};

/// Invariant suites of every module under one master seed. Rows use the run
/// report columns with quantity "<module>/<invariant>" and the inputs in the
/// set column. Failures are also written to `diagnostics`.
RunResult verify_all(const VerifyOptions& opts, std::ostream& diagnostics);

} // namespace kacflow::cli
