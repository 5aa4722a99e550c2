#pragma once

#include <iosfwd>

namespace mina {

/// Exit codes: 0 success, 1 usage error, 2 data or format error.
int cli_main(int argc, const char* const* argv);
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mina
