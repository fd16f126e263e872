#pragma once

#include "recsyn/common.hpp"

#include <string>

namespace recsyn {

/// 0 ok, 2 usage, then io 3, parse 4, validation 5, compute 6; anything else 1.
int exit_code_for(ErrorCategory category) noexcept;

std::string version_text();

int run_cli(int argc, char** argv);

}  // namespace recsyn
