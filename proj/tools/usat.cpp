#include <iostream>

#include "usat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return usat::run_cli(args, std::cout, std::cerr);
}
