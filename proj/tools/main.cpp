#include <iostream>
#include <string>
#include <vector>

#include "maxdiff/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return maxdiff::cli::run(args, std::cout, std::cerr);
}
