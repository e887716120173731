// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "attnsum/cli.hpp"

int main(int argc, char** argv) {
  return attnsum::cli::dispatch(argc, argv, std::cout, std::cerr);
}
