#pragma once

namespace gapinfer::cli {

// Entry point behind the gapinfer binary; returns the process exit code
// (0 ok, 1 usage or input-file problems, 2 records that could not be
// processed).
int run(int argc, const char* const* argv);

}  // namespace gapinfer::cli
