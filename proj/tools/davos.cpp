#include "davos/cli.hpp"

int main(int argc, char** argv)
{
    return davos::cli_main(argc, argv);
}
