#include <iostream>

#include "fracnet/cli.hpp"

int main(int argc, char** argv) { return fracnet::cli_main(argc, argv, std::cout, std::cerr); }
