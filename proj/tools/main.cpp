#include <iostream>

#include "cli/commands.hpp"

int main(int argc, char** argv) { return mhaff::cli::dispatch(argc, argv, std::cout, std::cerr); }
