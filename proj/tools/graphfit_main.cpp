#include "graphfit/cli.hpp"

int main(int argc, char** argv) {
  return graphfit::cli::run_cli({argv + 1, argv + argc});
}
