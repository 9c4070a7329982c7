#pragma once

// Minimal CLI runner for end-to-end tests: executes the didp binary with a
// shell command line, captures exit code and both streams through temp
// files.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace didp::testing {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// `env_prefix` is prepended verbatim (e.g. "DIDP_THREADS=4 ").
inline CmdResult run_cli(const std::string& args,
                         const std::string& env_prefix = "") {
  static int counter = 0;
  const std::string tag = std::to_string(getpid()) + "_" + std::to_string(counter++);
  const std::string out_path = "/tmp/didp_test_out_" + tag;
  const std::string err_path = "/tmp/didp_test_err_" + tag;
  const std::string cmd = env_prefix + std::string(DIDP_CLI_PATH) + " " + args +
                          " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return result;
}

}  // namespace didp::testing
