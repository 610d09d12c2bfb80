#include "mfq/cli.hpp"

int main(int argc, char** argv) { return mfq::cli_main(argc, argv); }
