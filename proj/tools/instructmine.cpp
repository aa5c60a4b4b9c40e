// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "instructmine/cli.hpp"

int main(int argc, char** argv) {
    return instructmine::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
