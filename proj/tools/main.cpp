#include "bigat/cli.hpp"

int main(int argc, char** argv) { return bigat::cli::cli_main(argc, argv); }
