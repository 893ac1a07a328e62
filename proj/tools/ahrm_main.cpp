#include "ahrm/cli.hpp"

int main(int argc, char** argv) { return ahrm::cli::run_cli(argc, argv); }
