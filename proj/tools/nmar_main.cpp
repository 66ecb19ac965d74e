#include <iostream>
#include <string>
#include <vector>

#include "nmar/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nmar::run_cli(args, std::cout, std::cerr);
}
