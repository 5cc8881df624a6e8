#include "msense/cli.hpp"

int main(int argc, char** argv) { return msense::run_cli(argc, argv); }
