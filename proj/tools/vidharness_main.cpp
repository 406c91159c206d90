#include <iostream>

#include "vidharness/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vidharness::cli::run(args, std::cout, std::cerr);
}
