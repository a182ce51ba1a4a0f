#pragma once

#include <string>
#include <vector>

namespace coursekit::cli {

inline constexpr const char* kVersion = "0.3.0";

/// Entry point shared by the coursekit binary and the tests. Returns 0 on
/// success, 1 on usage or validation errors, 2 on I/O errors.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace coursekit::cli
