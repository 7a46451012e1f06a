// SPDX-License-Identifier: Apache-2.0
#include "mrag/executor.hpp"

#include <algorithm>

namespace mrag {

namespace {

nlohmann::ordered_json context_to_json(const RetrievedContext& ctx) {
    nlohmann::ordered_json j;
    j["source_tool"] = ctx.source_tool;
    j["title"] = ctx.title;
    j["snippet"] = ctx.snippet;
    if (!ctx.image_ref.empty()) j["image"] = ctx.image_ref;
    j["rank"] = ctx.rank;
    return j;
}

RetrievedContext context_from_json(const nlohmann::json& j) {
    RetrievedContext ctx;
    ctx.source_tool = j.value("source_tool", "");
    ctx.title = j.value("title", "");
    ctx.snippet = j.value("snippet", "");
    ctx.image_ref = j.value("image", "");
    ctx.rank = j.value("rank", 0);
    return ctx;
}

}  // namespace

nlohmann::ordered_json pipeline_result_to_json(const PipelineResult& r) {
    nlohmann::ordered_json j;
    j["example_id"] = r.example_id;
    j["category"] = category_id(r.category);
    j["answer"] = r.answer;
    j["contexts_used"] = nlohmann::ordered_json::array();
    for (const auto& ctx : r.contexts_used) j["contexts_used"].push_back(context_to_json(ctx));
    if (r.gold_query_used) j["gold_query_used"] = *r.gold_query_used;
    j["rewrite_failed"] = r.rewrite_failed;
    j["tool_calls"] = {{"i2i", r.tool_calls.i2i},
                       {"t2t", r.tool_calls.t2t},
                       {"t2i", r.tool_calls.t2i},
                       {"rewrite", r.tool_calls.rewrite},
                       {"task", r.tool_calls.task}};
    j["trace"] = nlohmann::ordered_json::array();
    for (const auto& event : r.trace) {
        nlohmann::ordered_json e;
        e["stage"] = event.stage;
        e["seconds"] = event.seconds;
        if (event.failed) e["failed"] = true;
        j["trace"].push_back(std::move(e));
    }
    return j;
}

PipelineResult pipeline_result_from_json(const nlohmann::json& j) {
    PipelineResult r;
    r.example_id = j.at("example_id").get<std::string>();
    r.category = category_from_id(j.at("category").get<std::string>());
    r.answer = j.value("answer", "");
    for (const auto& ctx : j.value("contexts_used", nlohmann::json::array())) {
        r.contexts_used.push_back(context_from_json(ctx));
    }
    if (j.contains("gold_query_used")) r.gold_query_used = j["gold_query_used"].get<std::string>();
    r.rewrite_failed = j.value("rewrite_failed", false);
    if (j.contains("tool_calls")) {
        const auto& tc = j["tool_calls"];
        r.tool_calls = {tc.value("i2i", 0), tc.value("t2t", 0), tc.value("t2i", 0),
                        tc.value("rewrite", 0), tc.value("task", 0)};
    }
    for (const auto& e : j.value("trace", nlohmann::json::array())) {
        r.trace.push_back({e.value("stage", ""), e.value("seconds", 0.0), e.value("failed", false)});
    }
    return r;
}

std::string assemble_context_block(const std::vector<RetrievedContext>& contexts,
                                   std::string_view label) {
    std::vector<RetrievedContext> ordered = contexts;
    std::sort(ordered.begin(), ordered.end(),
              [](const RetrievedContext& a, const RetrievedContext& b) { return a.rank < b.rank; });
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (ordered[i].rank != static_cast<int>(i) + 1) {
            throw std::invalid_argument("context ranks must be contiguous from 1");
        }
    }
    std::string block(label);
    block += ":";
    if (ordered.empty()) {
        block += "\n(none)";
        return block;
    }
    for (const auto& ctx : ordered) {
        block += "\n[" + std::to_string(ctx.rank) + "] " + ctx.title + " — " + ctx.snippet;
    }
    return block;
}

Executor::Executor(ModelBackend& task_model, ModelBackend& rewrite_model, SearchBackend& retrieval,
                   const PromptLibrary& prompts, LatencyRecorder* recorder,
                   ExecutorOptions options)
    : task_model_(task_model),
      rewrite_model_(rewrite_model),
      retrieval_(retrieval),
      prompts_(prompts),
      recorder_(recorder),
      options_(options) {
    if (options_.top_k_i2i < 1 || options_.top_k_t2t < 1) {
        throw std::invalid_argument("top_k must be >= 1");
    }
}

std::string Executor::rewrite_gold_query(const VqaExample& example, Category category,
                                         const std::vector<RetrievedContext>& image_contexts,
                                         StageEvent& event) {
    std::string rendered =
        category == Category::both_mrag
            ? prompts_.render_gold_query_with_image_context(example.question, image_contexts)
            : prompts_.render_gold_query_plain(example.question);
    ModelRequest request;
    request.messages.push_back(make_user_message(rendered, example.image));
    request.fixture_key = "rewrite:" + example.id;

    for (int attempt = 0; attempt < 2; ++attempt) {
        ModelResponse response = rewrite_model_.chat(request);
        event.seconds += response.latency_seconds;
        try {
            std::string gold = parse_json_field(response.text, "gold_query");
            if (gold.empty()) {
                throw Error(ErrorCode::parse_failed, "rewrite produced an empty gold_query");
            }
            return gold;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::parse_failed && e.code() != ErrorCode::key_missing &&
                e.code() != ErrorCode::value_not_string) {
                throw;
            }
        }
    }
    event.failed = true;
    return {};
}

PipelineResult Executor::execute(const VqaExample& example, Category category) {
    if (example.question.empty()) throw std::invalid_argument("question must be non-empty");
    if (example.image.empty()) throw std::invalid_argument("image reference must be present");

    PipelineResult result;
    result.example_id = example.id;
    result.category = category;

    bool wants_image = category == Category::image_mrag || category == Category::both_mrag;
    bool wants_text = category == Category::text_mrag || category == Category::both_mrag;

    std::vector<RetrievedContext> image_contexts;
    std::vector<RetrievedContext> text_contexts;
    bool text_searched = false;

    if (wants_image) {
        SearchResponse hits = retrieval_.search(ToolKind::i2i, example.image, options_.top_k_i2i);
        image_contexts = std::move(hits.results);
        result.tool_calls.i2i += 1;
        if (recorder_) recorder_->record(ToolKind::i2i, hits.latency_seconds);
        result.trace.push_back({"i2i", hits.latency_seconds, false});
    }

    if (wants_text) {
        StageEvent rewrite_event{"rewrite", 0.0, false};
        std::string gold = rewrite_gold_query(example, category, image_contexts, rewrite_event);
        result.tool_calls.rewrite += 1;
        if (recorder_) recorder_->record(ToolKind::rewrite, rewrite_event.seconds);
        result.trace.push_back(rewrite_event);
        if (rewrite_event.failed) {
            // Degrade to the retrieval already in hand (c2 -> c1, c4 -> c3)
            // rather than failing the whole query.
            result.rewrite_failed = true;
        } else {
            result.gold_query_used = gold;
            SearchResponse hits = retrieval_.search(ToolKind::t2t, gold, options_.top_k_t2t);
            text_contexts = std::move(hits.results);
            text_searched = true;
            result.tool_calls.t2t += 1;
            if (recorder_) recorder_->record(ToolKind::t2t, hits.latency_seconds);
            result.trace.push_back({"t2t", hits.latency_seconds, false});
        }
    }

    std::string prompt;
    if (wants_image) {
        prompt += assemble_context_block(image_contexts, "Image search results");
    }
    if (text_searched) {
        if (!prompt.empty()) prompt += "\n\n";
        prompt += assemble_context_block(text_contexts, "Text search results");
    }
    if (!prompt.empty()) prompt += "\n\n";
    prompt += example.question;

    ModelRequest request;
    request.messages.push_back(make_user_message(prompt, example.image));
    request.fixture_key = "answer:" + example.id;
    ModelResponse response = task_model_.chat(request);
    result.answer = response.text;
    result.tool_calls.task += 1;
    if (recorder_) recorder_->record(ToolKind::task, response.latency_seconds);
    result.trace.push_back({"answer", response.latency_seconds, false});

    result.contexts_used = std::move(image_contexts);
    result.contexts_used.insert(result.contexts_used.end(),
                                std::make_move_iterator(text_contexts.begin()),
                                std::make_move_iterator(text_contexts.end()));
    return result;
}

}  // namespace mrag
