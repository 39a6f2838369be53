#include "cli.hpp"

int main(int argc, char** argv) { return lcroll::cli::run(argc, argv); }
