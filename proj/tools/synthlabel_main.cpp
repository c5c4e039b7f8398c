#include "synthlabel/cli.hpp"

int main(int argc, char** argv) { return synthlabel::run_cli(argc, argv); }
