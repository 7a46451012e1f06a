// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mrag/error.hpp"

namespace mrag {

/// Retrieval strategy for one query. The numeric order c1 < c2 < c3 < c4 is
/// part of the serialization contract.
enum class Category {
    no_mrag = 1,     // c1: answer directly
    text_mrag = 2,   // c2: text search over a rewritten query
    image_mrag = 3,  // c3: image search over the input image
    both_mrag = 4,   // c4: image search, then text search
};

constexpr std::array<Category, 4> kAllCategories = {
    Category::no_mrag, Category::text_mrag, Category::image_mrag, Category::both_mrag};

/// "c1".."c4"
const char* category_id(Category c);
/// "NO_MRAG", "TEXT_MRAG", "IMAGE_MRAG", "BOTH_MRAG"
const char* category_name(Category c);
/// Parses "c1".."c4"; throws Error(bad_input) otherwise.
Category category_from_id(std::string_view id);
/// The multiple-choice letter the planner prompt assigns to this category.
char letter_of(Category c);

/// Maps a model reply to a category. Scans for the first standalone choice
/// letter A-D (case-insensitive, delimited by non-alphanumerics), so replies
/// like "C.", " a ", or "I think B is right" all resolve.
/// Throws Error(malformed_choice) when no such letter exists.
Category category_from_letter(std::string_view reply);

/// Per-item tool usage counts. Component-wise addable.
struct ToolCallProfile {
    int i2i = 0;
    int t2t = 0;
    int t2i = 0;
    int rewrite = 0;
    int task = 0;

    bool operator==(const ToolCallProfile&) const = default;
    ToolCallProfile& operator+=(const ToolCallProfile& o) {
        i2i += o.i2i;
        t2t += o.t2t;
        t2i += o.t2i;
        rewrite += o.rewrite;
        task += o.task;
        return *this;
    }
};

/// Canonical tool usage of a clean run of each inference path.
ToolCallProfile expected_tool_calls(Category c);

/// Average per-call seconds used for modeled time accounting.
struct LatencyModel {
    double i2i_seconds = 6.4;
    double t2t_seconds = 1.4;
    double t2i_seconds = 1.9;
    double agent_infer_seconds = 1.65;
};

/// Search-tool time: sum of count * average seconds over i2i/t2t/t2i.
/// Rewrite and task model calls are not searches and do not contribute.
double modeled_search_seconds(const ToolCallProfile& totals, const LatencyModel& latency);

/// One retrieval hit.
struct RetrievedContext {
    std::string source_tool;  // "i2i", "t2t", or "t2i"
    std::string title;
    std::string snippet;
    std::string image_ref;  // empty = none
    int rank = 0;           // 1-based within its result list
};

/// One dataset item: an image/question pair, an optional reference answer,
/// and the optional fields the annotator fills in.
struct VqaExample {
    std::string id;
    std::string image;
    std::string question;
    std::optional<std::string> answer;
    std::optional<std::string> gold_query;
    std::optional<std::string> image_query;
    std::optional<std::string> image_entity;
    std::optional<Category> category;
};

nlohmann::ordered_json example_to_json(const VqaExample& ex);
VqaExample example_from_json(const nlohmann::json& j);

/// Loads a JSONL dataset. Enforces non-empty unique ids and non-empty
/// questions; errors carry the offending line number.
std::vector<VqaExample> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const std::vector<VqaExample>& examples);

/// Line-oriented JSON helpers shared by all output writers.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::ordered_json>& rows);
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

/// Picks k of n indices uniformly without replacement, returned in ascending
/// order. Hand-rolled draw so results are identical across platforms and
/// standard library implementations.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t k, std::uint64_t seed);

}  // namespace mrag
