#include <iostream>
#include <string>
#include <vector>

#include "hpanel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hpanel::run_command(args, std::cout, std::cerr);
}
