#include "qbvi_cli/app.hpp"

int main(int argc, char** argv) { return qbvi::cli::main_entry(argc, argv); }
