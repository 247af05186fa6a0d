#include "tatt/cli.hpp"

int main(int argc, char** argv) { return tatt::run_cli(argc, argv); }
