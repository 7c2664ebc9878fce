#include <iostream>

#include "iidlab/cli.hpp"

int main(int argc, char** argv) { return iid::cli::run_cli(argc, argv, std::cout, std::cerr); }
