#include "vrag/pipeline.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vrag::pipeline::run(args, std::cout, std::cerr);
}
