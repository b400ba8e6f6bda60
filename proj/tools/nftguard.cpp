#include "nftguard/cli.hpp"

int main(int argc, char** argv) { return nftguard::cli::main(argc, argv); }
