#include "qpoisson/cli.hpp"

int main(int argc, char** argv) { return qpoisson::run_cli(argc, argv); }
