#include "chaoslab/cli.hpp"

int main(int argc, char** argv) { return chaoslab::cli_main(argc, argv); }
