#include "cli.hpp"

int main(int argc, char **argv) { return dprgd::cli::cli_main(argc, argv); }
