#pragma once

#include <ostream>

namespace mhaff::cli {

// Runs one subcommand. Returns 0 on success, 1 on usage or configuration
// errors, 2 on data errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mhaff::cli
