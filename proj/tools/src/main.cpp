#include <iostream>

#include "facepain/cli/commands.hpp"

int main(int argc, char** argv) { return facepain::cli::run_cli(argc, argv, std::cout, std::cerr); }
