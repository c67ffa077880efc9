#include "fbmlt/cli.hpp"

int main(int argc, char** argv) { return fbmlt::run_cli(argc, argv); }
