#include "kite/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return kite::cli::run(argc, argv, std::cout, std::cerr); }
