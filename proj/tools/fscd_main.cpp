#include <vector>

#include "fscd/cli.hpp"

int main(int argc, char** argv) {
  return fscd::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
