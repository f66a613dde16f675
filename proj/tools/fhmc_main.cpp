#include <iostream>
#include <string>
#include <vector>

#include "fhmc/cli.hpp"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fhmc::cli::run(args, std::cout, std::cerr);
}
