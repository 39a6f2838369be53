// Command-line front end: generate | train | rollout | evaluate.
// Exit codes: 0 success, 1 runtime failure, 2 usage error. On failure every
// file the command already wrote is removed.
#pragma once

#include <string>
#include <vector>

namespace lcroll::cli {

int run(int argc, const char* const* argv);

// argv without the program name; convenience for tests.
int run(const std::vector<std::string>& args);

}  // namespace lcroll::cli
