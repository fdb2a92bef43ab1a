#include "seld/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(true);
  return seld::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
