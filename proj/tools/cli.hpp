#pragma once

#include <iosfwd>

namespace ergoshadow {

// Exit codes: 0 success, 1 failed rows under --strict or a failed
// computation, 2 usage or config error.
int cli_main(int argc, char** argv);
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ergoshadow
