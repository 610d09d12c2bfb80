#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfq {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,  // bad config, usage error, unknown flag, store/config mismatch
  kExitNetwork = 3,
  kExitValidation = 4,
  kExitIo = 5,
};

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace mfq
