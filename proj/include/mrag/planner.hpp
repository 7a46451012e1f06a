// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "mrag/backends.hpp"
#include "mrag/core.hpp"
#include "mrag/prompts.hpp"

namespace mrag {

struct PlanDecision {
    Category category = Category::both_mrag;
    std::string raw_output;
    bool used_fallback = false;
    int attempts = 1;
    double latency_seconds = 0.0;
};

nlohmann::ordered_json plan_decision_to_json(const std::string& example_id, const PlanDecision& d);

struct PlannerOptions {
    int max_attempts = 2;
    double temperature = 0.0;
};

/// Picks the retrieval category for a query with the agent model. A reply
/// with no recognizable choice letter is retried; when every attempt is
/// malformed the planner falls back to the both-searches route, which trades
/// efficiency for the best answer odds.
class Planner {
public:
    Planner(ModelBackend& agent, const PromptLibrary& prompts, PlannerOptions options = {});

    /// Preconditions: non-empty question and image reference.
    PlanDecision plan(const VqaExample& example);

private:
    ModelBackend& agent_;
    const PromptLibrary& prompts_;
    PlannerOptions options_;
};

}  // namespace mrag
