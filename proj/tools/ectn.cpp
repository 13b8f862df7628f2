#include <iostream>

#include "ectn/cli.hpp"

int main(int argc, char** argv) { return ectn::cli::run(argc, argv, std::cout, std::cerr); }
