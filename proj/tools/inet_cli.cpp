#include <iostream>

#include "inet/cli.hpp"

int main(int argc, char** argv) { return inet::command_dispatch(argc, argv, std::cout, std::cerr); }
