#include <iostream>
#include <string>
#include <vector>

#include "sigat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sigat::run_cli(args, std::cout, std::cerr);
}
