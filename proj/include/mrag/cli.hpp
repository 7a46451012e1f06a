// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace mrag {

/// Full command-line entry point (annotate / plan / run / eval / report).
/// Returns the process exit status: 0 success, 1 runtime failure, 2 usage.
int cli_main(int argc, const char* const* argv);

}  // namespace mrag
