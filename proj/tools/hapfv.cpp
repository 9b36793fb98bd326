#include <string>
#include <vector>

#include "hapfv/cli.hpp"

int main(int argc, char** argv) {
    return hapfv::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
