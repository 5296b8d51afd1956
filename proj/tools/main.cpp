#include <string>
#include <vector>

#include "respira_cli.hpp"

int main(int argc, char** argv) {
  return respira::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
