#include <iostream>

#include "csifb/cli/commands.hpp"

int main(int argc, char** argv) { return csifb::cli::run(argc, argv, std::cout, std::cerr); }
