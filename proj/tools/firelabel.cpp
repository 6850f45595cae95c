#include "firelabel/cli.hpp"

int main(int argc, char** argv) { return firelabel::cli::run_cli(argc, argv); }
