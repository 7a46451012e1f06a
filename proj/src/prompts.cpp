// SPDX-License-Identifier: Apache-2.0
#include "mrag/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#ifndef MRAG_DEFAULT_PROMPTS_DIR
#define MRAG_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace mrag {

namespace {

bool is_slot_char(unsigned char c) { return std::isalnum(c) != 0 || c == '_'; }

// Walks a template body with format-string brace rules. When out is null the
// walk only validates syntax and collects slot names.
void walk_template(const std::string& body, const std::string& where,
                   const std::map<std::string, std::string>* slots, std::string* out,
                   std::set<std::string>* names) {
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (c == '{') {
            if (i + 1 < body.size() && body[i + 1] == '{') {
                if (out) *out += '{';
                ++i;
                continue;
            }
            std::size_t close = body.find('}', i + 1);
            if (close == std::string::npos) {
                throw Error(ErrorCode::bad_input, where + ": unterminated '{'");
            }
            std::string name = body.substr(i + 1, close - i - 1);
            if (name.empty() ||
                !std::all_of(name.begin(), name.end(),
                             [](char ch) { return is_slot_char(static_cast<unsigned char>(ch)); })) {
                throw Error(ErrorCode::bad_input, where + ": bad slot name \"" + name + "\"");
            }
            if (names) names->insert(name);
            if (out) {
                auto it = slots->find(name);
                if (it == slots->end()) {
                    throw std::invalid_argument("unbound slot \"" + name + "\" in " + where);
                }
                *out += it->second;
            }
            i = close;
        } else if (c == '}') {
            if (i + 1 < body.size() && body[i + 1] == '}') {
                if (out) *out += '}';
                ++i;
                continue;
            }
            throw Error(ErrorCode::bad_input, where + ": stray '}'");
        } else if (out) {
            *out += c;
        }
    }
}

void require_nonempty(std::string_view value, const char* what) {
    if (value.empty()) {
        throw std::invalid_argument(std::string(what) + " must be non-empty");
    }
}

// Validates that ranks form 1..n (in any input order) and returns the
// contexts sorted by rank.
std::vector<RetrievedContext> sorted_by_rank(std::vector<RetrievedContext> contexts) {
    std::sort(contexts.begin(), contexts.end(),
              [](const RetrievedContext& a, const RetrievedContext& b) { return a.rank < b.rank; });
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        if (contexts[i].rank != static_cast<int>(i) + 1) {
            throw std::invalid_argument("context ranks must be contiguous from 1");
        }
    }
    return contexts;
}

const char* kEmptyImageResultsMarker = "(no image search results)";

}  // namespace

std::string render_template(const PromptTemplate& tpl,
                            const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tpl.body.size());
    walk_template(tpl.body, "template " + tpl.name, &slots, &out, nullptr);
    return out;
}

PromptLibrary PromptLibrary::load_dir(const std::filesystem::path& dir) {
    static const struct {
        const char* name;
        std::set<std::string> slots;
    } kAssets[] = {
        {"planner_t", {"text_query"}},
        {"gold_train", {"question", "answer"}},
        {"gold_with_img_ctx", {"question", "image_search_results"}},
        {"gold_plain", {"question"}},
        {"image_query", {"question", "gold_query"}},
        {"judge", {"query", "reference_answer", "generated_answer"}},
    };
    PromptLibrary lib;
    for (const auto& asset : kAssets) {
        std::filesystem::path file = dir / (std::string(asset.name) + ".txt");
        PromptTemplate tpl;
        tpl.name = asset.name;
        tpl.body = read_text_file(file);
        std::set<std::string> found;
        walk_template(tpl.body, file.string(), nullptr, nullptr, &found);
        if (found != asset.slots) {
            throw Error(ErrorCode::bad_input,
                        file.string() + ": unexpected slot set for template " + asset.name);
        }
        tpl.required_slots.assign(found.begin(), found.end());
        lib.templates_.emplace(tpl.name, std::move(tpl));
    }
    return lib;
}

std::filesystem::path PromptLibrary::default_dir() {
    if (const char* env = std::getenv("MRAG_PROMPTS_DIR"); env && *env) return env;
    return MRAG_DEFAULT_PROMPTS_DIR;
}

const PromptTemplate& PromptLibrary::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw std::invalid_argument("unknown prompt template \"" + std::string(name) + "\"");
    }
    return it->second;
}

std::string PromptLibrary::render_planner_prompt(std::string_view question) const {
    require_nonempty(question, "question");
    return render_template(get("planner_t"), {{"text_query", std::string(question)}});
}

std::string PromptLibrary::render_gold_query_training(std::string_view question,
                                                      std::string_view answer) const {
    require_nonempty(question, "question");
    require_nonempty(answer, "answer");
    return render_template(
        get("gold_train"),
        {{"question", std::string(question)}, {"answer", std::string(answer)}});
}

std::string PromptLibrary::render_gold_query_with_image_context(
    std::string_view question, const std::vector<RetrievedContext>& contexts) const {
    require_nonempty(question, "question");
    auto ordered = sorted_by_rank(contexts);
    std::string block;
    if (ordered.empty()) {
        block = kEmptyImageResultsMarker;
    } else {
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            if (i) block += "\n\n";
            block += "Image Title: " + ordered[i].title;
            if (!ordered[i].snippet.empty()) block += "\nImage Snippet: " + ordered[i].snippet;
        }
    }
    return render_template(get("gold_with_img_ctx"), {{"question", std::string(question)},
                                                      {"image_search_results", block}});
}

std::string PromptLibrary::render_gold_query_plain(std::string_view question) const {
    require_nonempty(question, "question");
    return render_template(get("gold_plain"), {{"question", std::string(question)}});
}

std::string PromptLibrary::render_image_query_prompt(std::string_view question,
                                                     std::string_view gold_query) const {
    require_nonempty(question, "question");
    require_nonempty(gold_query, "gold_query");
    return render_template(
        get("image_query"),
        {{"question", std::string(question)}, {"gold_query", std::string(gold_query)}});
}

std::string PromptLibrary::render_judge_prompt(std::string_view query, std::string_view reference,
                                               std::string_view generated) const {
    require_nonempty(query, "query");
    require_nonempty(reference, "reference");
    require_nonempty(generated, "generated");
    return render_template(get("judge"), {{"query", std::string(query)},
                                          {"reference_answer", std::string(reference)},
                                          {"generated_answer", std::string(generated)}});
}

namespace {

// Returns the end index (one past the closing brace) of the balanced object
// starting at reply[start], or npos when the braces never balance.
std::size_t balanced_end(std::string_view reply, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < reply.size(); ++i) {
        char c = reply[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

bool try_parse_object(std::string_view text, nlohmann::json& out) {
    out = nlohmann::json::parse(text, nullptr, false);
    if (!out.is_discarded() && out.is_object()) return true;
    // Repair pass: models often emit single-quoted pseudo-JSON.
    std::string repaired(text);
    std::replace(repaired.begin(), repaired.end(), '\'', '"');
    out = nlohmann::json::parse(repaired, nullptr, false);
    return !out.is_discarded() && out.is_object();
}

}  // namespace

std::string parse_json_field(std::string_view reply, std::string_view key) {
    std::size_t start = reply.find('{');
    while (start != std::string_view::npos) {
        std::size_t end = balanced_end(reply, start);
        if (end == std::string_view::npos) break;
        nlohmann::json obj;
        if (try_parse_object(reply.substr(start, end - start), obj)) {
            auto it = obj.find(key);
            if (it == obj.end()) {
                throw Error(ErrorCode::key_missing,
                            "reply object has no key \"" + std::string(key) + "\"");
            }
            if (!it->is_string()) {
                throw Error(ErrorCode::value_not_string,
                            "value at \"" + std::string(key) + "\" is not a string");
            }
            return it->get<std::string>();
        }
        start = reply.find('{', start + 1);
    }
    throw Error(ErrorCode::parse_failed, "no JSON object in model reply");
}

double parse_judge_score(std::string_view reply) {
    for (std::size_t i = 0; i < reply.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(reply[i])) == 0) continue;
        std::size_t start = i;
        if (start > 0 && reply[start - 1] == '-') --start;
        std::size_t end = i;
        while (end < reply.size() && std::isdigit(static_cast<unsigned char>(reply[end]))) ++end;
        if (end < reply.size() && reply[end] == '.') {
            ++end;
            while (end < reply.size() && std::isdigit(static_cast<unsigned char>(reply[end]))) ++end;
        }
        double score = std::stod(std::string(reply.substr(start, end - start)));
        if (score < 1.0 || score > 5.0) {
            throw Error(ErrorCode::score_out_of_range,
                        "judge score " + std::to_string(score) + " outside [1,5]");
        }
        return score;
    }
    throw Error(ErrorCode::parse_failed, "no numeric score in judge reply");
}

}  // namespace mrag
