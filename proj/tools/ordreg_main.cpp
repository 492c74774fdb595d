#include <string>
#include <vector>

#include "ordreg/cli.hpp"

int main(int argc, char** argv) {
  return ordreg::cli::run(std::vector<std::string>(argv, argv + argc));
}
