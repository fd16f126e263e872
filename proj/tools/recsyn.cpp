#include "recsyn/cli.hpp"

int main(int argc, char** argv) { return recsyn::run_cli(argc, argv); }
