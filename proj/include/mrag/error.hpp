// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mrag {

/// Failure codes surfaced by backends, parsers, and pipeline stages.
enum class ErrorCode {
    backend_unreachable,
    backend_refused,
    fixture_miss,
    parse_failed,
    key_missing,
    value_not_string,
    score_out_of_range,
    malformed_choice,
    decomposition_failed,
    judge_failed,
    rewrite_failed,
    misaligned_scores,
    bad_input,
};

const char* error_code_name(ErrorCode code);

/// Runtime failure with a machine-readable code. what() is prefixed with the
/// code name so CLI output stays grep-able.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mrag
