#pragma once
// Command-line front end: single-point analytic evaluation, seeded
// simulation runs, parameter sweeps, and analytic-vs-simulation validation,
// emitted as CSV or JSON.  The parsing/dispatch lives in the library so tests
// can drive it in-process and capture output.

#include <iosfwd>
#include <string>
#include <vector>

namespace dcf::cli {

// argv-style entry point (argv[0] is the program name).
int run(int argc, const char* const* argv);

// In-process entry point: args WITHOUT the program name.  Normal output goes
// to `out` (unless redirected by --out), diagnostics to `err`.  Returns the
// process exit code: 0 success, 1 failed validation/reference check,
// 2 invalid input, other nonzero for parse errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dcf::cli
