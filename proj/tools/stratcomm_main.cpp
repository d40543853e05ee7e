#include <iostream>
#include <string>
#include <vector>

#include "stratcomm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return stratcomm::run_cli(args, std::cout, std::cerr);
}
