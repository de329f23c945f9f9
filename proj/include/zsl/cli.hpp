#pragma once

// Command-line front end. Exit codes: 0 success, 1 computation error,
// 2 input or usage error.

#include <iosfwd>
#include <string>
#include <vector>

namespace zsl::cli {

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zsl::cli
