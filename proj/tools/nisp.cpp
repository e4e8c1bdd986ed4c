#include <iostream>

#include "nisp/cli.hpp"

int main(int argc, char** argv) { return nisp::cli::run(argc, argv, std::cout, std::cerr); }
