// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "knobforge/cli.hpp"

int main(int argc, char** argv) { return knobforge::run_cli(argc, argv, std::cout, std::cerr); }
