#include "sgsadmm/cli.hpp"

int main(int argc, char** argv) { return sgsadmm::cli_main(argc, argv); }
