#include "convrank/cli.hpp"

int main(int argc, char** argv) { return convrank::cli::run_cli(argc, argv); }
