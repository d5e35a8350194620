#include <iostream>

#include "leakscan/cli.hpp"

int main(int argc, char** argv) { return leakscan::cli::run(argc, argv, std::cout, std::cerr); }
