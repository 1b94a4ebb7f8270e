#include "vlmood/cli.hpp"

int main(int argc, char** argv) { return vlmood::cli::main(argc, argv); }
