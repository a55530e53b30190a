#include "fleetsurv/cli.hpp"

int main(int argc, char** argv) { return fleetsurv::cli::run(argc, argv); }
