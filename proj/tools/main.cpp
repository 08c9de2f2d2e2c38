#include <iostream>

#include "rtcal/cli.hpp"

int main(int argc, char** argv) { return rtcal::cli::run_cli(argc, argv, std::cout, std::cerr); }
