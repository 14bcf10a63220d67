#include <iostream>

#include "foley/cli.hpp"

int main(int argc, char** argv) { return foley::run_cli(argc, argv, std::cout, std::cerr); }
