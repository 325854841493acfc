// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "fed/cli.hpp"

int main(int argc, char** argv) { return fed::cli::run(argc, argv, std::cout, std::cerr); }
