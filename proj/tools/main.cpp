#include "nsqmc/cli.hpp"

int main(int argc, char** argv) { return nsqmc::cli_main(argc, argv); }
