#include <iostream>

#include "swf/cli.hpp"

int main(int argc, char** argv) { return swf::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
