#include <iostream>

#include "hwlaw/cli.hpp"

int main(int argc, char** argv) { return hwlaw::run_cli(argc, argv, std::cout, std::cerr); }
