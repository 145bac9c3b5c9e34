#include <iostream>

#include "jungle/cli.hpp"

int main(int argc, char** argv) { return jungle::cli::run(argc, argv, std::cout, std::cerr); }
