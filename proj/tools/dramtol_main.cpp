// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "dramtol/cli.hpp"

int main(int argc, char** argv) { return dramtol::run_cli(argc, argv, std::cout, std::cerr); }
