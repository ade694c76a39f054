#include <iostream>
#include <string>
#include <vector>

#include "odl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return odl::cli::run(args, std::cout, std::cerr);
}
