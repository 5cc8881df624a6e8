#pragma once

namespace msense {

/// Entry point behind the `sense` binary. Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace msense
