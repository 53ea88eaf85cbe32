#include "cli.hpp"

int main(int argc, char** argv) { return ergoshadow::cli_main(argc, argv); }
