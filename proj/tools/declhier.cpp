#include <iostream>
#include <string>
#include <vector>

#include "declhier/gateway.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return declhier::run_cli(args, std::cout, std::cerr, std::cin);
}
