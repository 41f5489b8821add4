#include <iostream>

#include "jointdep/cli.hpp"

int main(int argc, char** argv) { return jointdep::run_cli(argc, argv, std::cout, std::cerr); }
