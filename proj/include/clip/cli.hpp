#pragma once

namespace clip::cli {

// Full command-line dispatcher. Returns the process exit code: 0 on
// success, 1 on runtime or data errors, 2 on bad usage.
int run(int argc, const char* const* argv);

}  // namespace clip::cli
