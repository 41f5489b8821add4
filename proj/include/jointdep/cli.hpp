#pragma once

#include <iosfwd>

namespace jointdep {

// Entry point of the command-line tool. argv[0] is the program name.
// Returns 0 on success, 1 on usage or configuration errors and 2 on data or
// model errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jointdep
