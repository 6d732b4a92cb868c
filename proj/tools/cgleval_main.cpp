#include "cgleval/cli.hpp"

int main(int argc, char** argv) { return cgleval::cli::run_main(argc, argv); }
