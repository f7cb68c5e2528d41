#include <iostream>
#include <string>
#include <vector>

#include "albumgan/cli.hpp"

int main(int argc, char** argv) {
    return albumgan::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
