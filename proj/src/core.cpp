// SPDX-License-Identifier: Apache-2.0
#include "mrag/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace mrag {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::backend_unreachable: return "BACKEND_UNREACHABLE";
        case ErrorCode::backend_refused: return "BACKEND_REFUSED";
        case ErrorCode::fixture_miss: return "FIXTURE_MISS";
        case ErrorCode::parse_failed: return "PARSE_FAILED";
        case ErrorCode::key_missing: return "KEY_MISSING";
        case ErrorCode::value_not_string: return "VALUE_NOT_STRING";
        case ErrorCode::score_out_of_range: return "SCORE_OUT_OF_RANGE";
        case ErrorCode::malformed_choice: return "MALFORMED_CHOICE";
        case ErrorCode::decomposition_failed: return "DECOMPOSITION_FAILED";
        case ErrorCode::judge_failed: return "JUDGE_FAILED";
        case ErrorCode::rewrite_failed: return "REWRITE_FAILED";
        case ErrorCode::misaligned_scores: return "MISALIGNED_SCORES";
        case ErrorCode::bad_input: return "BAD_INPUT";
    }
    return "UNKNOWN";
}

const char* category_id(Category c) {
    switch (c) {
        case Category::no_mrag: return "c1";
        case Category::text_mrag: return "c2";
        case Category::image_mrag: return "c3";
        case Category::both_mrag: return "c4";
    }
    throw std::invalid_argument("invalid Category value");
}

const char* category_name(Category c) {
    switch (c) {
        case Category::no_mrag: return "NO_MRAG";
        case Category::text_mrag: return "TEXT_MRAG";
        case Category::image_mrag: return "IMAGE_MRAG";
        case Category::both_mrag: return "BOTH_MRAG";
    }
    throw std::invalid_argument("invalid Category value");
}

Category category_from_id(std::string_view id) {
    for (Category c : kAllCategories) {
        if (id == category_id(c)) return c;
    }
    throw Error(ErrorCode::bad_input, "unknown category id \"" + std::string(id) + "\"");
}

char letter_of(Category c) {
    // The planner prompt names visual help "B" and textual help "C", so the
    // letters do not follow the c1..c4 numbering.
    switch (c) {
        case Category::no_mrag: return 'A';
        case Category::text_mrag: return 'C';
        case Category::image_mrag: return 'B';
        case Category::both_mrag: return 'D';
    }
    throw std::invalid_argument("invalid Category value");
}

Category category_from_letter(std::string_view reply) {
    auto is_word_char = [](unsigned char ch) { return std::isalnum(ch) != 0; };
    for (std::size_t i = 0; i < reply.size(); ++i) {
        char up = static_cast<char>(std::toupper(static_cast<unsigned char>(reply[i])));
        if (up < 'A' || up > 'D') continue;
        bool left_ok = i == 0 || !is_word_char(static_cast<unsigned char>(reply[i - 1]));
        bool right_ok =
            i + 1 == reply.size() || !is_word_char(static_cast<unsigned char>(reply[i + 1]));
        if (!left_ok || !right_ok) continue;
        switch (up) {
            case 'A': return Category::no_mrag;
            case 'B': return Category::image_mrag;
            case 'C': return Category::text_mrag;
            case 'D': return Category::both_mrag;
        }
    }
    throw Error(ErrorCode::malformed_choice,
                "no choice letter A-D in reply \"" + std::string(reply.substr(0, 80)) + "\"");
}

ToolCallProfile expected_tool_calls(Category c) {
    switch (c) {
        case Category::no_mrag: return {0, 0, 0, 0, 1};
        case Category::text_mrag: return {0, 1, 0, 1, 1};
        case Category::image_mrag: return {1, 0, 0, 0, 1};
        case Category::both_mrag: return {1, 1, 0, 1, 1};
    }
    throw std::invalid_argument("invalid Category value");
}

double modeled_search_seconds(const ToolCallProfile& totals, const LatencyModel& latency) {
    return totals.i2i * latency.i2i_seconds + totals.t2t * latency.t2t_seconds +
           totals.t2i * latency.t2i_seconds;
}

nlohmann::ordered_json example_to_json(const VqaExample& ex) {
    nlohmann::ordered_json j;
    j["id"] = ex.id;
    j["image"] = ex.image;
    j["question"] = ex.question;
    if (ex.answer) j["answer"] = *ex.answer;
    if (ex.gold_query) j["gold_query"] = *ex.gold_query;
    if (ex.image_query) j["image_query"] = *ex.image_query;
    if (ex.image_entity) j["image_entity"] = *ex.image_entity;
    if (ex.category) j["category"] = category_id(*ex.category);
    return j;
}

namespace {

std::string require_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw Error(ErrorCode::bad_input,
                    std::string("dataset row missing string field \"") + key + "\"");
    }
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_string()) {
        throw Error(ErrorCode::bad_input, std::string("field \"") + key + "\" must be a string");
    }
    return it->get<std::string>();
}

}  // namespace

VqaExample example_from_json(const nlohmann::json& j) {
    VqaExample ex;
    ex.id = require_string(j, "id");
    ex.image = require_string(j, "image");
    ex.question = require_string(j, "question");
    ex.answer = optional_string(j, "answer");
    ex.gold_query = optional_string(j, "gold_query");
    ex.image_query = optional_string(j, "image_query");
    ex.image_entity = optional_string(j, "image_entity");
    if (auto cat = optional_string(j, "category")) ex.category = category_from_id(*cat);
    if (ex.id.empty()) throw Error(ErrorCode::bad_input, "example id must be non-empty");
    if (ex.question.empty()) {
        throw Error(ErrorCode::bad_input, "example \"" + ex.id + "\" has an empty question");
    }
    return ex;
}

std::vector<VqaExample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::bad_input, "cannot open dataset " + path.string());
    std::vector<VqaExample> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::bad_input,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            out.push_back(example_from_json(j));
        } catch (const Error& e) {
            throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(out.back().id).second) {
            throw Error(ErrorCode::bad_input,
                        "duplicate example id \"" + out.back().id + "\" in " + path.string());
        }
    }
    return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<VqaExample>& examples) {
    std::vector<nlohmann::ordered_json> rows;
    rows.reserve(examples.size());
    for (const auto& ex : examples) rows.push_back(example_to_json(ex));
    write_jsonl(path, rows);
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::bad_input, "cannot open " + path.string());
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::bad_input,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::ordered_json>& rows) {
    std::ostringstream buf;
    for (const auto& row : rows) buf << row.dump() << '\n';
    write_text_file(path, buf.str());
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::bad_input, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::bad_input, "short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::bad_input, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

namespace {

// Bounded draw via 128-bit multiply instead of std::uniform_int_distribution,
// whose output is implementation-defined.
std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(rng()) * static_cast<unsigned __int128>(n)) >> 64);
}

}  // namespace

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t k, std::uint64_t seed) {
    if (k > population) k = population;
    std::vector<std::size_t> pool(population);
    for (std::size_t i = 0; i < population; ++i) pool[i] = i;
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first k slots end up holding the sample.
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + bounded(rng, population - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace mrag
