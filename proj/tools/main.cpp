#include "dcf/cli.hpp"

int main(int argc, char** argv) { return dcf::cli::run(argc, argv); }
