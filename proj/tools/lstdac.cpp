#include "lstdac/cli.hpp"

int main(int argc, char** argv) { return lstdac::run_cli(argc, argv); }
