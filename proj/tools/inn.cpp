// SPDX-License-Identifier: Apache-2.0
#include "inn/cli.hpp"

int main(int argc, char** argv) { return inn::cli::run(argc, argv); }
