#include <iostream>

#include "intraday/cli.hpp"

int main(int argc, char** argv) { return intraday::run_cli(argc, argv, std::cout, std::cerr); }
