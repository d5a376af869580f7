#include "mmatch/cli.hpp"

int main(int argc, char** argv) { return mmatch::cli::run(argc, argv); }
