#include "kframe_cli/cli.hpp"

int main(int argc, char** argv) { return kframe::cli::main_entry(argc, argv); }
