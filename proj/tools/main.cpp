#include <string>
#include <vector>

#include "crashsev/cli.hpp"

int main(int argc, char** argv) {
    return crashsev::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
