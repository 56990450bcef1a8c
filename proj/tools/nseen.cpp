/* SPDX-License-Identifier: Apache-2.0 */

#include <iostream>

#include "nseen/commands.hpp"

int main(int argc, char** argv) { return nseen::cli::run(argc, argv, std::cout, std::cerr); }
