#include "commands.hpp"

int main(int argc, char** argv) {
  return routeseq::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
