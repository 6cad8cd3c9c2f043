#include "krysp/cli.hpp"

int main(int argc, char** argv) { return krysp::cli_main(argc, argv); }
