#include "lcgnn/cli.hpp"

int main(int argc, char** argv) {
  return lcgnn::cli::run(argc, argv);
}
