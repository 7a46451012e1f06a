// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrag/backends.hpp"
#include "mrag/core.hpp"
#include "mrag/prompts.hpp"

namespace mrag {

/// One backend call inside a pipeline run, in execution order.
struct StageEvent {
    std::string stage;  // "i2i", "rewrite", "t2t", "answer"
    double seconds = 0.0;
    bool failed = false;
};

/// Everything one executed query produced.
struct PipelineResult {
    std::string example_id;
    Category category = Category::no_mrag;  // the planned route
    std::string answer;
    std::vector<RetrievedContext> contexts_used;
    std::optional<std::string> gold_query_used;
    bool rewrite_failed = false;
    ToolCallProfile tool_calls;
    std::vector<StageEvent> trace;
};

nlohmann::ordered_json pipeline_result_to_json(const PipelineResult& r);
PipelineResult pipeline_result_from_json(const nlohmann::json& j);

/// Serializes retrieval hits for the answer prompt: a header line, then one
/// "[rank] title — snippet" line per hit in rank order; "(none)" when empty.
/// Precondition: ranks contiguous from 1.
std::string assemble_context_block(const std::vector<RetrievedContext>& contexts,
                                   std::string_view label);

struct ExecutorOptions {
    int top_k_i2i = 3;
    int top_k_t2t = 3;
};

/// Runs the per-category inference path: optional retrieval, optional
/// gold-query rewriting, then one task-model call. A rewrite whose output
/// stays unparseable after one retry degrades the path (c2 answers like c1,
/// c4 like c3) instead of aborting.
class Executor {
public:
    /// recorder may be null. The rewrite backend is separate from the task
    /// backend so one fixed rewriter can serve differing task models.
    Executor(ModelBackend& task_model, ModelBackend& rewrite_model, SearchBackend& retrieval,
             const PromptLibrary& prompts, LatencyRecorder* recorder, ExecutorOptions options = {});

    PipelineResult execute(const VqaExample& example, Category category);

private:
    std::string rewrite_gold_query(const VqaExample& example, Category category,
                                   const std::vector<RetrievedContext>& image_contexts,
                                   StageEvent& event);

    ModelBackend& task_model_;
    ModelBackend& rewrite_model_;
    SearchBackend& retrieval_;
    const PromptLibrary& prompts_;
    LatencyRecorder* recorder_;
    ExecutorOptions options_;
};

}  // namespace mrag
