#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dcsr::cli {

/// Exit codes: 0 success, 1 usage error, 2 data or runtime error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dcsr::cli
