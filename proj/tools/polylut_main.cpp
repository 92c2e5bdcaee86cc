#include <iostream>
#include <string>
#include <vector>

#include "polylut/cli.hpp"

int main(int argc, char** argv) {
  return polylut::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
