#include "cli.hpp"

int main(int argc, char** argv) { return caac::tools::Cli(argc, argv); }
