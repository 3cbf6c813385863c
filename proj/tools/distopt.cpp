#include "distopt/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return distopt::run_cli(argc, argv, std::cout, std::cerr); }
