#include <iostream>

#include "cqosc/cli.hpp"

int main(int argc, char** argv) { return cqosc::cli::run(argc, argv, std::cout, std::cerr); }
