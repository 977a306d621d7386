// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace dramtol {

/// Runs one subcommand. Failures print {"error": code, "message": ...} on
/// `err` and return a nonzero status.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace dramtol
