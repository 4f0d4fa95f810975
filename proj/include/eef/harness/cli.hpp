#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace eef::harness {

inline constexpr const char* kManifestSchema = "eef-manifest";
inline constexpr int kManifestVersion = 1;

/// `args` excludes the program name. Returns 0 on success, 2 on usage
/// errors (unknown flag, bad value, missing or malformed config) and 1 on
/// any other failure, after writing one diagnostic line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eef::harness
