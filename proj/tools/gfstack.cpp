#include "gfstack/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return gfstack::cli::run(argc, argv, std::cout, std::cerr);
}
