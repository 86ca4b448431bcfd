#include "pdl/cli.hpp"

int main(int argc, char** argv) { return pdl::cli::run(argc, argv); }
