#include <iostream>
#include <string>
#include <vector>

#include "psychoval/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return psychoval::run_cli(args, std::cout, std::cerr);
}
