#pragma once

namespace patchstyle {

// Entry point for the `patchstyle` command-line tool.
int run_cli(int argc, char** argv);

}  // namespace patchstyle
