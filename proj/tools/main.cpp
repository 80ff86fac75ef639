#include "handgm/cli.hpp"

int main(int argc, char** argv) { return handgm::run_cli(argc, argv); }
