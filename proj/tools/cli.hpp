#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace voxelox::cli {

/// Runs the command line. Returns the process exit code:
/// 0 success, 1 usage, 2 validation, 3 I/O.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace voxelox::cli
