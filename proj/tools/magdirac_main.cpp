#include "magdirac/cli.hpp"

int main(int argc, char** argv) { return magdirac::run_cli(argc, argv); }
