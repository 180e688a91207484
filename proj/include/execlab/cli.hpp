#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace execlab::cli {

enum ExitCode : int { success = 0, runtime_error = 1, usage_error = 2 };

/// Malformed command line or configuration document.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entry point of the `execlab` tool. Writes the manifest to `out` and a JSON
/// error object to `err`; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Shortest round-trip decimal form used in every emitted CSV.
std::string format_number(double x);

}  // namespace execlab::cli
