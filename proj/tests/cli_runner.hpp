#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <string>

namespace aoi::testing {

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

/// Runs the CLI with `args` (shell syntax), capturing stdout; stderr is discarded.
inline CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + AOI_CLI_PATH + "\" " + args + " 2>/dev/null";
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace aoi::testing
