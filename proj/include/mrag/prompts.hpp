// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mrag/core.hpp"

namespace mrag {

/// One loaded template. Slots are written {name}; literal braces are escaped
/// {{ and }}. Slot names are discovered at load time.
struct PromptTemplate {
    std::string name;
    std::string body;
    std::vector<std::string> required_slots;
};

/// Binds slot values into a template. Every slot occurring in the template
/// must be bound; escaped braces render as single braces.
/// Throws std::invalid_argument on an unbound slot.
std::string render_template(const PromptTemplate& tpl,
                            const std::map<std::string, std::string>& slots);

/// Loads the six prompt assets from a directory and offers typed renderers
/// for each. Immutable after construction.
class PromptLibrary {
public:
    /// Expects {planner_t,gold_train,gold_with_img_ctx,gold_plain,image_query,judge}.txt.
    static PromptLibrary load_dir(const std::filesystem::path& dir);

    /// Resolution order for the asset directory: explicit argument, the
    /// MRAG_PROMPTS_DIR environment variable, then the build-time default.
    static std::filesystem::path default_dir();

    const PromptTemplate& get(std::string_view name) const;

    std::string render_planner_prompt(std::string_view question) const;
    std::string render_gold_query_training(std::string_view question,
                                           std::string_view answer) const;
    std::string render_gold_query_with_image_context(
        std::string_view question, const std::vector<RetrievedContext>& contexts) const;
    std::string render_gold_query_plain(std::string_view question) const;
    std::string render_image_query_prompt(std::string_view question,
                                          std::string_view gold_query) const;
    std::string render_judge_prompt(std::string_view query, std::string_view reference,
                                    std::string_view generated) const;

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Finds the first balanced JSON object in a model reply (prose and code
/// fences around it are fine) and returns the string value at key.
/// Errors: PARSE_FAILED, KEY_MISSING, VALUE_NOT_STRING.
std::string parse_json_field(std::string_view reply, std::string_view key);

/// Extracts the first decimal number from a judge reply.
/// Errors: PARSE_FAILED (no number), SCORE_OUT_OF_RANGE (outside [1,5]).
double parse_judge_score(std::string_view reply);

}  // namespace mrag
