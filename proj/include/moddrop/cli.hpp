#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace moddrop {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerics = 3;
inline constexpr int kExitIo = 4;

// Entry point behind the moddrop executable; `args` excludes the program name.
//   gen      synthesize a dataset                --out DIR
//   train    train one regime (or all IM models)  --data DIR --out DIR [--regime R]
//   eval     per-configuration report             CKPT... --data DIR --out CSV
//   compare  side-by-side tables and assertions   NAME=CSV... [--assert EXPR]...
// Shared: --config FILE, --seed N, --set key=value (repeatable).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace moddrop
