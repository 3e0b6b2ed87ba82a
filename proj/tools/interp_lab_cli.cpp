#include "interp_lab/cli.hpp"

int main(int argc, char** argv) { return ilab::cli::cli_main(argc, argv); }
