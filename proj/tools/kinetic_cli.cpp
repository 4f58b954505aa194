#include "kinetic/cli/commands.hpp"

int main(int argc, char** argv) { return kinetic::cli::main_entry(argc, argv); }
