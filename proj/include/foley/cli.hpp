#pragma once

#include <iosfwd>

namespace foley {

// Subcommands ingest, train, generate, eval, plot and selftest. Returns 0 on
// success, 2 on usage or validation errors, 1 on internal errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace foley
