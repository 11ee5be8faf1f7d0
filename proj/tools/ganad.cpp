#include <string>
#include <vector>

#include "ganad/cli.hpp"

int main(int argc, char** argv)
{
    return ganad::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
