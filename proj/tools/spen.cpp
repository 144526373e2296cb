#include <iostream>

#include "spen/cli.hpp"

int main(int argc, char** argv) { return spen::run_cli(argc, argv, std::cout, std::cerr); }
