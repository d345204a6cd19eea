#include <vector>

#include "slideadapt/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return slideadapt::run_cli(args);
}
