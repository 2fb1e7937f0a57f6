#pragma once

namespace lcgnn::cli {

// Full command-line driver (cv / ablate / fixture). Returns the process exit
// status; never throws.
int run(int argc, const char* const* argv);

}  // namespace lcgnn::cli
