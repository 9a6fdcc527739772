#include <vector>

#include "lipreg/io.hpp"

int main(int argc, char** argv) {
  return lipreg::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
