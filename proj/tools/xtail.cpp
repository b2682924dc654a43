#include <string>
#include <vector>

#include "xtail/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return xtail::cli::run(args);
}
