#pragma once
// Command-line front end. `vlmood <subcommand> ...`; see `vlmood --help`.

#include <iosfwd>
#include <string>
#include <vector>

namespace vlmood::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // validation or runtime error
inline constexpr int kExitUsage = 2;

/// Default output directory when --out is omitted.
inline constexpr const char* kOutputDirEnv = "VLMOOD_OUTPUT_DIR";

/// Runs one invocation. `args` excludes the program name. Data goes to
/// files or `out`; diagnostics and usage errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace vlmood::cli
