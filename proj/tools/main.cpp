#include <iostream>

#include "symtrack/cli.hpp"

int main(int argc, char** argv) { return symtrack::run_cli(argc, argv, std::cout, std::cerr); }
