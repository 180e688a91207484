#include "execlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return execlab::cli::run(argc, argv, std::cout, std::cerr); }
