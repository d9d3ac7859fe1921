// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/cli.hpp"

int main(int argc, char** argv)
{
    return fluidrec::cli::main(argc, argv);
}
