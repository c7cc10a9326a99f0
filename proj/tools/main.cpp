#include "cli.hpp"

int main(int argc, char** argv) { return cuqr::cli::run(argc, argv); }
