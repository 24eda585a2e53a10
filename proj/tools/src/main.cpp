#include <iostream>

#include "ebtrend_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ebtrend::cli::run_cli(args, std::cout, std::cerr);
}
