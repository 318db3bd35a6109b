#pragma once

#include <iosfwd>

namespace lanestp::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 malformed input.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lanestp::cli
