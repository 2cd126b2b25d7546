#include <iostream>

#include "opsteer/cli.hpp"

int main(int argc, char** argv) {
  return opsteer::parse_and_run(argc, argv, std::cout, std::cerr);
}
