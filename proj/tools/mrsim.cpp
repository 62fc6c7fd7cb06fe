#include "mr/console.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return mr::console::cli_main(argc, argv, std::cout, std::cerr);
}
