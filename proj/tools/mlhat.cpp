#include <iostream>
#include <string>
#include <vector>

#include "mlhat/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return mlhat::cli_run(args, std::cout, std::cerr);
}
