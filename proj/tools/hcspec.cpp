#include <iostream>

#include "hcs/cli.hpp"

int main(int argc, char** argv) { return hcs::cli_main(argc, argv, std::cout, std::cerr); }
