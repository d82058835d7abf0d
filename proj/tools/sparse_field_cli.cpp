#include "sparsefield/experiments.hpp"

int main(int argc, char** argv) { return sparsefield::cli_main(argc, argv); }
