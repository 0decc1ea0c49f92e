#include "vem/cli.hpp"

int main(int argc, char** argv) { return vem::run_cli(argc, argv); }
