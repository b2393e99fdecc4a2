#include "medpath/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return medpath::cli::run(argc, argv, std::cout, std::cerr);
}
