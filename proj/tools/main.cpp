#include "caeigs/cli.hpp"

int main(int argc, char** argv) { return caeigs::cli::run(argc, argv); }
