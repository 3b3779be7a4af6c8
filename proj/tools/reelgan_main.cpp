#include "reelgan/cli.hpp"

int main(int argc, char** argv) { return reelgan::cli::run(argc, argv); }
