#pragma once

#include <iosfwd>

namespace obcs {

/// Entry point of the `obcs` tool. Results go to `out`; the resolved config
/// (one JSON line) and diagnostics go to `err`.
///
/// Exit status: 0 on success, 1 on parameter or configuration errors, 2 when
/// an iterative solver fails to converge.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace obcs
