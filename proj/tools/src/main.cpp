#include <iostream>

#include "irisnet_cli/cli.hpp"

int main(int argc, char** argv) { return irisnet::cli::run(argc, argv, std::cout, std::cerr); }
