#include <iostream>
#include <string>
#include <vector>

#include "gravinv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gravinv::run(args, std::cout, std::cerr);
}
