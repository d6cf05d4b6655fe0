#include "imit/cli/run.hpp"

int main(int argc, char** argv) { return imit::run_command(argc, argv); }
