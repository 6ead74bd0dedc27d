#include "mfgan/cli.hpp"

int main(int argc, char** argv) { return mfgan::cli::main(argc, argv); }
