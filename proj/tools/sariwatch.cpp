#include <iostream>

#include "sariwatch/cli.hpp"

int main(int argc, char** argv) { return sariwatch::cli::run(argc, argv, std::cout, std::cerr); }
