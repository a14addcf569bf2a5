#include <string>
#include <vector>

#include "citefix/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return citefix::cli::run_command(args);
}
