#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return spidereval::app::run(argc, argv, std::cout, std::cerr); }
