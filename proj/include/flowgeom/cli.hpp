#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flowgeom::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kDegenerate = 3;
inline constexpr int kIo = 4;

// args excludes the program name, e.g. {"synth", "--seed", "7", "--out", "dir"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowgeom::cli
