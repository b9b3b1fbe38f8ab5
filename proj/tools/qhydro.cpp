#include "qhydro/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return qhydro::cli::run_cli(argc, argv, std::cout, std::cerr); }
