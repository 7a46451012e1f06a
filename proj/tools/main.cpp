// SPDX-License-Identifier: Apache-2.0
#include "mrag/cli.hpp"

int main(int argc, char** argv) { return mrag::cli_main(argc, argv); }
