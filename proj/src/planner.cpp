// SPDX-License-Identifier: Apache-2.0
#include "mrag/planner.hpp"

#include <cstdio>

namespace mrag {

nlohmann::ordered_json plan_decision_to_json(const std::string& example_id,
                                             const PlanDecision& d) {
    nlohmann::ordered_json j;
    j["id"] = example_id;
    j["category"] = category_id(d.category);
    j["raw_output"] = d.raw_output;
    j["used_fallback"] = d.used_fallback;
    j["attempts"] = d.attempts;
    j["latency_seconds"] = d.latency_seconds;
    return j;
}

Planner::Planner(ModelBackend& agent, const PromptLibrary& prompts, PlannerOptions options)
    : agent_(agent), prompts_(prompts), options_(options) {
    if (options_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

PlanDecision Planner::plan(const VqaExample& example) {
    if (example.question.empty()) throw std::invalid_argument("question must be non-empty");
    if (example.image.empty()) throw std::invalid_argument("image reference must be present");

    ModelRequest request;
    request.messages.push_back(
        make_user_message(prompts_.render_planner_prompt(example.question), example.image));
    request.temperature = options_.temperature;
    request.fixture_key = "plan:" + example.id;

    PlanDecision decision;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        ModelResponse response = agent_.chat(request);
        decision.raw_output = response.text;
        decision.latency_seconds += response.latency_seconds;
        decision.attempts = attempt;
        try {
            decision.category = category_from_letter(response.text);
            return decision;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::malformed_choice) throw;
        }
    }
    decision.category = Category::both_mrag;
    decision.used_fallback = true;
    std::fprintf(stderr, "warning: planner fell back to BOTH_MRAG for example %s\n",
                 example.id.c_str());
    return decision;
}

}  // namespace mrag
