#include <iostream>

#include "sotk/cli/app.hpp"

int main(int argc, char** argv) {
    return sotk::cli::run(argc, argv, std::cout, std::cerr);
}
