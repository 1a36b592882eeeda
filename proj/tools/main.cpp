#include "ewmb/cli.hpp"

int main(int argc, char** argv) { return ewmb::run_cli(argc, argv); }
