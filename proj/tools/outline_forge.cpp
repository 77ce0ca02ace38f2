#include "outline_forge/cli.hpp"

int main(int argc, char** argv) { return outline_forge::run_cli(argc, argv); }
