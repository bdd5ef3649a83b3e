#include <iostream>

#include "wattlens/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wattlens::run_cli(args, std::cout, std::cerr);
}
