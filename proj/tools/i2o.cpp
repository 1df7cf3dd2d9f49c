#include <iostream>
#include <string>
#include <vector>

#include "i2o/cli/commands.hpp"

int main(int argc, char** argv) {
  return i2o::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
