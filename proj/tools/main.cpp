#include "ssreg/cli.hpp"

int main(int argc, char** argv) { return ssreg::cli::run_cli(argc, argv); }
