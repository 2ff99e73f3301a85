#include <iostream>

#include "hetdeconv/cli.hpp"

int main(int argc, char** argv) { return hetdeconv::cli::run(argc, argv, std::cout, std::cerr); }
