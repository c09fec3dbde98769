#include "solcensus/cli.hpp"

int main(int argc, char** argv) { return solcensus::run_cli(argc, argv); }
