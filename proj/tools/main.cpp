#include "patchstyle/cli.hpp"

int main(int argc, char** argv) { return patchstyle::run_cli(argc, argv); }
