#include "khgt/cli/run.hpp"

int main(int argc, char** argv) { return khgt::cli::run(argc, argv); }
