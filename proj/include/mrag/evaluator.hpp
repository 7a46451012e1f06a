// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mrag/backends.hpp"
#include "mrag/core.hpp"
#include "mrag/executor.hpp"
#include "mrag/prompts.hpp"

namespace mrag {

/// Affine 1-5 to 0-100 map: (s - 1) * 25. Fixed points 1->0, 3->50, 5->100.
double scale_judge_score(double raw);

/// Reference-token recall: lowercase both sides, strip punctuation,
/// whitespace-tokenize, then |multiset intersection| / |reference tokens|.
/// Precondition: reference tokenizes to at least one token.
double token_accuracy(std::string_view generated, std::string_view reference);

/// Judge-model wrapper: renders the rubric, parses the 1-5 score, retries a
/// bad reply once. Throws Error(judge_failed) when both attempts fail.
class Judge {
public:
    Judge(ModelBackend& backend, const PromptLibrary& prompts, int max_attempts = 2);

    struct Outcome {
        double raw = 0.0;     // 1..5
        double scaled = 0.0;  // 0..100
    };
    /// fixture_key routes the mock backend ("judge:{example_id}").
    Outcome judge(const std::string& fixture_key, std::string_view query,
                  std::string_view reference, std::string_view generated);

private:
    ModelBackend& backend_;
    const PromptLibrary& prompts_;
    int max_attempts_;
};

/// Aggregate metrics over one evaluated dataset.
struct Report {
    std::string dataset_id;
    int n_items = 0;
    double mean_llm_score = 0.0;       // 0..100
    double mean_token_accuracy = 0.0;  // 0..1
    std::array<double, 4> category_ratios{};  // percent, c1..c4
    ToolCallProfile tool_totals;
    double modeled_search_seconds = 0.0;
    double measured_search_seconds = 0.0;
    double agent_infer_seconds = 0.0;
};

/// Folds per-item results and scores into a Report. scores/token_accuracies
/// are keyed by example id; a result without a score raises
/// Error(misaligned_scores).
Report aggregate(const std::string& dataset_id, const std::vector<PipelineResult>& results,
                 const std::map<std::string, double>& scaled_scores,
                 const std::map<std::string, double>& token_accuracies,
                 const LatencyModel& latency);

nlohmann::ordered_json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);
/// Table mirroring the published column layout (No, +k_i, +k_t, +k_{i,t}).
std::string report_markdown(const Report& report);

}  // namespace mrag
