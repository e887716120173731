// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_ATTNSUM_HPP_
#define ATTNSUM_ATTNSUM_HPP_

#include "attnsum/bundle_io.hpp"
#include "attnsum/config.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/eval.hpp"
#include "attnsum/gcn.hpp"
#include "attnsum/graph.hpp"
#include "attnsum/matrix.hpp"
#include "attnsum/oracle.hpp"
#include "attnsum/parallel.hpp"
#include "attnsum/random.hpp"
#include "attnsum/rouge.hpp"
#include "attnsum/training.hpp"

#endif  // ATTNSUM_ATTNSUM_HPP_
