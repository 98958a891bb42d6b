#include "gapinfer/cli.hpp"

int main(int argc, char** argv) { return gapinfer::cli::run(argc, argv); }
