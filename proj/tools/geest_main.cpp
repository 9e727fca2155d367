#include "geest/cli.hpp"

int main(int argc, char** argv) { return geest::cli_main(argc, argv); }
