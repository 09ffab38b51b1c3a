#include <string>
#include <vector>

#include "han/cli.hpp"

int main(int argc, char** argv) {
  return han::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
