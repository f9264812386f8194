#include "mustang/cli.hpp"

int main(int argc, char** argv) {
    return mustang::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
