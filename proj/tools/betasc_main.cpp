#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv)
{
    return betasc::cli::run(std::vector<std::string>(argv, argv + argc));
}
