#include <iostream>

#include "sp360/cli.hpp"

int main(int argc, char** argv) {
  return sp360::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
