// SPDX-License-Identifier: Apache-2.0
#include "mrag/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>

namespace mrag {

double scale_judge_score(double raw) {
    if (raw < 1.0 || raw > 5.0) {
        throw Error(ErrorCode::score_out_of_range,
                    "raw judge score " + std::to_string(raw) + " outside [1,5]");
    }
    return (raw - 1.0) * 25.0;
}

namespace {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc) || std::ispunct(uc)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            continue;
        }
        current += static_cast<char>(std::tolower(uc));
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace

double token_accuracy(std::string_view generated, std::string_view reference) {
    std::vector<std::string> ref_tokens = tokenize(reference);
    if (ref_tokens.empty()) {
        throw std::invalid_argument("reference must contain at least one token");
    }
    std::map<std::string, int> available;
    for (const auto& tok : tokenize(generated)) available[tok] += 1;
    int hits = 0;
    for (const auto& tok : ref_tokens) {
        auto it = available.find(tok);
        if (it != available.end() && it->second > 0) {
            it->second -= 1;
            hits += 1;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ref_tokens.size());
}

Judge::Judge(ModelBackend& backend, const PromptLibrary& prompts, int max_attempts)
    : backend_(backend), prompts_(prompts), max_attempts_(max_attempts) {
    if (max_attempts_ < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

Judge::Outcome Judge::judge(const std::string& fixture_key, std::string_view query,
                            std::string_view reference, std::string_view generated) {
    ModelRequest request;
    request.messages.push_back(
        make_user_message(prompts_.render_judge_prompt(query, reference, generated)));
    request.fixture_key = fixture_key;

    std::string last_failure;
    for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
        ModelResponse response = backend_.chat(request);
        try {
            Outcome outcome;
            outcome.raw = parse_judge_score(response.text);
            outcome.scaled = scale_judge_score(outcome.raw);
            return outcome;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::parse_failed && e.code() != ErrorCode::score_out_of_range) {
                throw;
            }
            last_failure = e.what();
        }
    }
    throw Error(ErrorCode::judge_failed, "judge reply unusable after " +
                                             std::to_string(max_attempts_) + " attempts (" +
                                             last_failure + ")");
}

Report aggregate(const std::string& dataset_id, const std::vector<PipelineResult>& results,
                 const std::map<std::string, double>& scaled_scores,
                 const std::map<std::string, double>& token_accuracies,
                 const LatencyModel& latency) {
    if (results.empty()) throw std::invalid_argument("cannot aggregate zero results");

    Report report;
    report.dataset_id = dataset_id;
    report.n_items = static_cast<int>(results.size());

    double score_sum = 0.0;
    double token_sum = 0.0;
    std::array<int, 4> per_category{};
    for (const auto& r : results) {
        auto score_it = scaled_scores.find(r.example_id);
        auto token_it = token_accuracies.find(r.example_id);
        if (score_it == scaled_scores.end() || token_it == token_accuracies.end()) {
            throw Error(ErrorCode::misaligned_scores,
                        "no score for example \"" + r.example_id + "\"");
        }
        score_sum += score_it->second;
        token_sum += token_it->second;
        per_category[static_cast<std::size_t>(r.category) - 1] += 1;
        report.tool_totals += r.tool_calls;
        for (const auto& event : r.trace) {
            if (event.stage == "i2i" || event.stage == "t2t" || event.stage == "t2i") {
                report.measured_search_seconds += event.seconds;
            }
        }
    }
    double n = static_cast<double>(report.n_items);
    report.mean_llm_score = score_sum / n;
    report.mean_token_accuracy = token_sum / n;
    for (std::size_t i = 0; i < 4; ++i) {
        report.category_ratios[i] = 100.0 * per_category[i] / n;
    }
    report.modeled_search_seconds = modeled_search_seconds(report.tool_totals, latency);
    report.agent_infer_seconds = n * latency.agent_infer_seconds;
    return report;
}

nlohmann::ordered_json report_to_json(const Report& report) {
    nlohmann::ordered_json j;
    j["dataset_id"] = report.dataset_id;
    j["n_items"] = report.n_items;
    j["mean_llm_score"] = report.mean_llm_score;
    j["mean_token_accuracy"] = report.mean_token_accuracy;
    j["category_ratios"] = {{"c1", report.category_ratios[0]},
                            {"c2", report.category_ratios[1]},
                            {"c3", report.category_ratios[2]},
                            {"c4", report.category_ratios[3]}};
    j["tool_totals"] = {{"i2i", report.tool_totals.i2i},
                        {"t2t", report.tool_totals.t2t},
                        {"t2i", report.tool_totals.t2i},
                        {"rewrite", report.tool_totals.rewrite},
                        {"task", report.tool_totals.task}};
    j["modeled_search_seconds"] = report.modeled_search_seconds;
    j["measured_search_seconds"] = report.measured_search_seconds;
    j["agent_infer_seconds"] = report.agent_infer_seconds;
    return j;
}

Report report_from_json(const nlohmann::json& j) {
    Report report;
    report.dataset_id = j.at("dataset_id").get<std::string>();
    report.n_items = j.at("n_items").get<int>();
    report.mean_llm_score = j.at("mean_llm_score").get<double>();
    report.mean_token_accuracy = j.at("mean_token_accuracy").get<double>();
    const auto& ratios = j.at("category_ratios");
    report.category_ratios = {ratios.at("c1").get<double>(), ratios.at("c2").get<double>(),
                              ratios.at("c3").get<double>(), ratios.at("c4").get<double>()};
    const auto& totals = j.at("tool_totals");
    report.tool_totals = {totals.at("i2i").get<int>(), totals.at("t2t").get<int>(),
                          totals.at("t2i").get<int>(), totals.at("rewrite").get<int>(),
                          totals.at("task").get<int>()};
    report.modeled_search_seconds = j.at("modeled_search_seconds").get<double>();
    report.measured_search_seconds = j.at("measured_search_seconds").get<double>();
    report.agent_infer_seconds = j.at("agent_infer_seconds").get<double>();
    return report;
}

namespace {

std::string fmt(double value, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, value);
    return buf;
}

}  // namespace

std::string report_markdown(const Report& report) {
    // Route columns follow the published order: none, image-side, text-side,
    // both; note that is c1, c3, c2, c4 in category numbering.
    std::string md;
    md += "# Evaluation report\n\n";
    md += "Dataset: `" + report.dataset_id + "`  \n";
    md += "Items: " + std::to_string(report.n_items) + "\n\n";
    md += "| Route | No | +k_i | +k_t | +k_{i,t} |\n";
    md += "|---|---|---|---|---|\n";
    md += "| % of queries | " + fmt(report.category_ratios[0], "%.1f") + " | " +
          fmt(report.category_ratios[2], "%.1f") + " | " + fmt(report.category_ratios[1], "%.1f") +
          " | " + fmt(report.category_ratios[3], "%.1f") + " |\n\n";
    md += "| Metric | Value |\n";
    md += "|---|---|\n";
    md += "| Mean judge score (0-100) | " + fmt(report.mean_llm_score, "%.2f") + " |\n";
    md += "| Mean token accuracy | " + fmt(report.mean_token_accuracy, "%.4f") + " |\n";
    md += "| Tool calls i2i/t2t/t2i/rewrite/task | " + std::to_string(report.tool_totals.i2i) +
          "/" + std::to_string(report.tool_totals.t2t) + "/" +
          std::to_string(report.tool_totals.t2i) + "/" +
          std::to_string(report.tool_totals.rewrite) + "/" +
          std::to_string(report.tool_totals.task) + " |\n";
    md += "| Modeled search time (s) | " + fmt(report.modeled_search_seconds) + " |\n";
    md += "| Measured search time (s) | " + fmt(report.measured_search_seconds) + " |\n";
    md += "| Modeled agent inference (s) | " + fmt(report.agent_infer_seconds) + " |\n";
    return md;
}

}  // namespace mrag
