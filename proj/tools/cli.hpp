#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace goxn::cli {

/// Exit codes: 0 success, 1 a run or processing step failed, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace goxn::cli
