#include <string>
#include <vector>

#include "svbrdf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return svbrdf::run_cli(args);
}
