#include "gprice/cli.hpp"

int main(int argc, char** argv) { return gprice::cli::main_entry(argc, argv); }
