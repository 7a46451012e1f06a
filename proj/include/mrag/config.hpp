// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mrag/backends.hpp"
#include "mrag/core.hpp"

namespace mrag {

/// One backend slot: either a live HTTP endpoint or a fixture file, never
/// both. Secrets come from the environment variable named here, not from the
/// config file itself.
struct BackendSlot {
    std::string base_url;
    std::string fixtures;
    std::string model;
    std::string api_key_env;
    double timeout_seconds = 60.0;
    int max_attempts = 2;
    double backoff_base_seconds = 1.0;
};

struct RunConfig {
    std::string dataset_path;
    std::string output_dir = "out";
    std::string prompts_dir;  // empty = PromptLibrary::default_dir()
    int workers = 1;
    std::uint64_t seed = 0;
    int top_k = 3;
    int top_k_i2i = 0;  // 0 = inherit top_k
    int top_k_t2t = 0;
    double correctness_threshold = 4.0;
    bool mock = false;
    LatencyModel latency;
    std::array<std::optional<int>, 4> caps;  // per category, unset = unlimited
    BackendSlot agent;
    BackendSlot task;
    BackendSlot rewrite;
    BackendSlot judge;
    BackendSlot retrieval;
};

/// Parses section/key-value config text. ${VAR} in values is replaced from
/// the environment (undefined variables are an error); lines starting with #
/// or ; are comments. Unknown sections or keys are rejected.
RunConfig parse_config(const std::string& text, const std::string& source_name);
RunConfig load_config(const std::filesystem::path& path);

/// Builds the backend for a slot. force_mock requires a fixtures path; a
/// slot with both or neither of base_url/fixtures is rejected.
std::shared_ptr<ModelBackend> make_model_backend(const BackendSlot& slot, bool force_mock,
                                                 const std::string& slot_name);
std::shared_ptr<SearchBackend> make_search_backend(const BackendSlot& slot, bool force_mock,
                                                   const std::string& slot_name);

}  // namespace mrag
