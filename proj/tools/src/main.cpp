#include <iostream>

#include "cloudlayer/cli.hpp"

int main(int argc, char** argv) {
  return cloudlayer::cli::run({argv, argv + argc}, std::cout, std::cerr);
}
