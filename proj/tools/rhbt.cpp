#include <iostream>

#include "rhbt/cli.hpp"

int main(int argc, char** argv)
{
    return rhbt::cli::run(argc, argv, std::cout, std::cerr);
}
