#pragma once

namespace cuqr::cli {

// Entry point shared by the binary and the tests. Returns the exit status.
int run(int argc, const char* const* argv);

}  // namespace cuqr::cli
