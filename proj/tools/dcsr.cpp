#include "dcsr/cli.hpp"

int main(int argc, char** argv) { return dcsr::cli::run(argc, argv); }
