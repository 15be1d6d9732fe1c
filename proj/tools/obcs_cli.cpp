#include <iostream>

#include "obcs/cli.hpp"

int main(int argc, char** argv) { return obcs::run_cli(argc, argv, std::cout, std::cerr); }
