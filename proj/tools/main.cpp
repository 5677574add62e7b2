#include "gaitgcn/cli.hpp"

int main(int argc, char** argv) { return gaitgcn::run_cli(argc, argv); }
