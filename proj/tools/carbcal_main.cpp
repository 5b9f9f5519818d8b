#include <iostream>
#include <string>
#include <vector>

#include "carbcal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return carbcal::cli::run(args, std::cout, std::cerr);
}
