#include "msqg/cli.hpp"

int main(int argc, char** argv) { return msqg::cli::run_cli(argc, argv); }
