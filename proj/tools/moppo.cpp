#include <iostream>

#include "moppo/cli.hpp"

int main(int argc, char** argv) {
  return moppo::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
