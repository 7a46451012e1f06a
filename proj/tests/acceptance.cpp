// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate: each check prints one [PASS]/[FAIL] line. The checks
// restate the required behavior with hand-written constants and oracles
// instead of reusing the library's own tables wherever possible.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrag/annotator.hpp"
#include "mrag/cli.hpp"
#include "mrag/evaluator.hpp"
#include "mrag/executor.hpp"
#include "mrag/planner.hpp"
#include "mrag/prompts.hpp"
#include "support.hpp"

using namespace mrag;
using testsupport::TempDir;
using testsupport::add_probe_fixtures;
using testsupport::make_example;
using testsupport::prompts;

namespace {

void expect(bool condition, const std::string& what) {
    if (!condition) throw std::runtime_error(what);
}

void expect_near(double actual, double wanted, double tolerance, const std::string& what) {
    if (std::fabs(actual - wanted) > tolerance) {
        throw std::runtime_error(what + ": got " + std::to_string(actual) + ", wanted " +
                                 std::to_string(wanted));
    }
}

struct AnnotationRig {
    MockModelBackend decompose;
    MockModelBackend task;
    MockModelBackend judge_model;
    Judge judge{judge_model, prompts()};

    Annotator make(AnnotatorOptions options = {}) {
        return Annotator(decompose, task, judge, prompts(), options);
    }
};

// ---------------------------------------------------------------------------

void check_probe_truth_table() {
    // Independent oracle over (bq, bi, bg), enumerated case by case.
    struct Row {
        bool bq, bi, bg;
        std::optional<Category> category;
    };
    const Row oracle[] = {
        {false, false, false, Category::both_mrag},
        {false, false, true, Category::image_mrag},
        {false, true, false, Category::text_mrag},
        {false, true, true, std::nullopt},
        {true, false, false, Category::no_mrag},
        {true, false, true, Category::no_mrag},
        {true, true, false, Category::no_mrag},
        {true, true, true, Category::no_mrag},
    };

    AnnotationRig rig;
    std::vector<VqaExample> batch;
    for (int i = 0; i < 8; ++i) {
        const Row& row = oracle[i];
        VqaExample ex = make_example("tt" + std::to_string(i), "", "reference");
        auto score = [](bool pass) { return pass ? "5" : "1"; };
        add_probe_fixtures(rig.decompose, rig.task, rig.judge_model, ex, score(row.bq),
                           score(row.bi), score(row.bg));
        batch.push_back(ex);
    }

    Annotator::BatchResult result = rig.make().annotate(batch);
    expect(result.records.size() == 8, "eight records expected");
    for (int i = 0; i < 8; ++i) {
        const Row& row = oracle[i];
        const AnnotationRecord& record = result.records[i];
        expect(record.example_id == "tt" + std::to_string(i), "records must be id-ordered");
        expect(record.label.category == row.category,
               "category mismatch for combo " + std::to_string(i));
        if (!row.category) {
            expect(record.label.exclusion_reason == ExclusionReason::contradictory_probes,
                   "contradictory probes must be excluded");
        }
        if (row.bq) {
            // Fixtures for the other probes exist but must never be consumed.
            expect(rig.task.call_count("answer:tt" + std::to_string(i) + "#qi") == 0 &&
                       rig.task.call_count("answer:tt" + std::to_string(i) + "#qg") == 0,
                   "a passing base probe must skip the remaining probes");
        }
    }
    expect(result.stats.labeled == std::array<int, 4>{4, 1, 1, 1}, "labeled tally");
    expect(result.stats.excluded_total() == 1, "exactly one exclusion");
}

// ---------------------------------------------------------------------------

struct HandProfile {
    int i2i, t2t, t2i, rewrite, task;
};

constexpr HandProfile kHandProfiles[4] = {
    {0, 0, 0, 0, 1},  // direct answer
    {0, 1, 0, 1, 1},  // text search
    {1, 0, 0, 0, 1},  // image search
    {1, 1, 0, 1, 1},  // both searches
};

bool matches(const ToolCallProfile& got, const HandProfile& want) {
    return got.i2i == want.i2i && got.t2t == want.t2t && got.t2i == want.t2i &&
           got.rewrite == want.rewrite && got.task == want.task;
}

void check_execution_profiles() {
    for (std::size_t i = 0; i < 4; ++i) {
        Category category = kAllCategories[i];
        MockModelBackend task_model;
        MockModelBackend rewrite_model;
        MockSearchBackend retrieval;
        Executor executor(task_model, rewrite_model, retrieval, prompts(), nullptr);

        VqaExample ex = make_example("ep" + std::to_string(i));
        task_model.add("answer:" + ex.id, "an answer");
        rewrite_model.add("rewrite:" + ex.id, R"({"gold_query": "a rewritten query"})");

        PipelineResult result = executor.execute(ex, category);
        expect(matches(result.tool_calls, kHandProfiles[i]),
               std::string("tool profile mismatch on path ") + category_id(category));
        expect(matches(expected_tool_calls(category), kHandProfiles[i]),
               "published profile table mismatch");

        if (category == Category::both_mrag) {
            std::vector<std::string> stages;
            for (const auto& event : result.trace) stages.push_back(event.stage);
            expect(stages == std::vector<std::string>{"i2i", "rewrite", "t2t", "answer"},
                   "both-searches trace must run i2i, rewrite, t2t, answer");
        }
    }
}

// ---------------------------------------------------------------------------

void check_cost_model() {
    const LatencyModel defaults;
    const double per_path[4] = {0.0, 1.4, 6.4, 7.8};  // c1..c4 with default averages
    for (std::size_t i = 0; i < 4; ++i) {
        double modeled = modeled_search_seconds(expected_tool_calls(kAllCategories[i]), defaults);
        expect_near(modeled, per_path[i], 1e-9,
                    std::string("modeled cost of ") + category_id(kAllCategories[i]));
    }
    ToolCallProfile mixed{10, 20, 5, 0, 0};
    expect_near(modeled_search_seconds(mixed, defaults), 101.5, 1e-9,
                "mixed profile 10*6.4 + 20*1.4 + 5*1.9");
}

// ---------------------------------------------------------------------------

void check_end_to_end_run() {
    TempDir dir;
    std::vector<VqaExample> examples;
    std::vector<nlohmann::ordered_json> fixtures;
    auto chat = [&](const std::string& key, const std::string& value) {
        fixtures.push_back({{"kind", "chat"}, {"key", key}, {"value", value}});
    };
    // Twelve items, three per route.
    const char letters[4] = {'A', 'C', 'B', 'D'};
    for (int i = 0; i < 12; ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "q%02d", i + 1);
        VqaExample ex = make_example(id);
        ex.answer = "Paris";
        examples.push_back(ex);
        char letter = letters[i / 3];
        chat("plan:" + ex.id, std::string(1, letter) + ".");
        chat("answer:" + ex.id, "the answer is Paris");
        if (letter == 'C' || letter == 'D') {
            chat("rewrite:" + ex.id, R"({"gold_query": "gold )" + ex.id + R"("})");
        }
    }
    fixtures.push_back({{"kind", "i2i"},
                        {"key", "img://q07"},
                        {"value", {{{"title", "H"}, {"snippet", "S"}}}},
                        {"latency_seconds", 6.4}});
    save_dataset(dir.file("twelve.jsonl"), examples);
    write_jsonl(dir.file("fixtures.jsonl"), fixtures);

    std::string config_text = "[run]\n";
    config_text += "dataset = " + dir.file("twelve.jsonl").string() + "\n";
    config_text += "out = " + dir.file("out").string() + "\n";
    config_text += "workers = 3\nseed = 1\nmock = true\n";
    for (const char* slot : {"agent", "task", "rewrite", "judge", "retrieval"}) {
        config_text += std::string("[") + slot + "]\nfixtures = " +
                       dir.file("fixtures.jsonl").string() + "\n";
    }
    write_text_file(dir.file("run.conf"), config_text);

    auto invoke = [&] {
        std::string config_path = dir.file("run.conf").string();
        const char* argv[] = {"mrag", "run", "--config", config_path.c_str()};
        return cli_main(4, argv);
    };
    expect(invoke() == 0, "run command must exit 0");

    ToolCallProfile totals;
    std::vector<PipelineResult> results;
    for (const auto& row : read_jsonl(dir.file("out") / "results.jsonl")) {
        results.push_back(pipeline_result_from_json(row));
        totals += results.back().tool_calls;
    }
    expect(results.size() == 12, "twelve results expected");
    expect(matches(totals, HandProfile{6, 6, 0, 6, 12}),
           "tool totals over 12 items must be i2i 6, t2t 6, t2i 0, rewrite 6, task 12");
    expect_near(modeled_search_seconds(totals, LatencyModel{}), 46.8, 1e-9,
                "modeled search time over the batch");

    std::string plans = read_text_file(dir.file("out") / "plans.jsonl");
    std::string result_bytes = read_text_file(dir.file("out") / "results.jsonl");
    expect(invoke() == 0, "rerun must exit 0");
    expect(read_text_file(dir.file("out") / "plans.jsonl") == plans,
           "rerun must reproduce plans.jsonl byte for byte");
    expect(read_text_file(dir.file("out") / "results.jsonl") == result_bytes,
           "rerun must reproduce results.jsonl byte for byte");
}

// ---------------------------------------------------------------------------

void check_judge_scaling() {
    MockModelBackend backend;
    backend.add("judge:one", "1");
    backend.add("judge:three", "3");
    backend.add("judge:five", "5");
    backend.add("judge:four", "4.0");
    backend.add("judge:seven", "7");
    Judge judge(backend, prompts());

    const struct {
        const char* key;
        double scaled;
    } rows[] = {{"judge:one", 0.0}, {"judge:three", 50.0}, {"judge:five", 100.0},
                {"judge:four", 75.0}};
    for (const auto& row : rows) {
        Judge::Outcome outcome = judge.judge(row.key, "q", "ref", "gen");
        expect_near(outcome.scaled, row.scaled, 1e-9, row.key);
    }

    bool rejected = false;
    try {
        judge.judge("judge:seven", "q", "ref", "gen");
    } catch (const Error& e) {
        rejected = e.code() == ErrorCode::judge_failed;
    }
    expect(rejected, "a score of 7 must be rejected, not clamped");

    bool out_of_range = false;
    try {
        parse_judge_score("7");
    } catch (const Error& e) {
        out_of_range = e.code() == ErrorCode::score_out_of_range;
    }
    expect(out_of_range, "parse_judge_score must flag 7 as out of range");
}

// ---------------------------------------------------------------------------

void check_category_mix() {
    // 600 queries routed 149/260/57/134 across c1..c4.
    const int counts[4] = {149, 260, 57, 134};
    const char letters[4] = {'A', 'C', 'B', 'D'};

    MockModelBackend agent;
    MockModelBackend task_model;
    MockModelBackend rewrite_model;
    MockSearchBackend retrieval;
    std::vector<VqaExample> examples;
    int serial = 0;
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < counts[c]; ++i) {
            char id[8];
            std::snprintf(id, sizeof(id), "m%03d", serial++);
            VqaExample ex = make_example(id);
            examples.push_back(ex);
            agent.add("plan:" + ex.id, std::string(1, letters[c]) + ".");
            task_model.add("answer:" + ex.id, "answer");
            rewrite_model.add("rewrite:" + ex.id, R"({"gold_query": "gold )" + ex.id + R"("})");
        }
    }

    Planner planner(agent, prompts());
    Executor executor(task_model, rewrite_model, retrieval, prompts(), nullptr);
    std::vector<PipelineResult> results;
    std::map<std::string, double> scores;
    std::map<std::string, double> tokens;
    for (const VqaExample& ex : examples) {
        PlanDecision decision = planner.plan(ex);
        expect(!decision.used_fallback, "scripted plans must parse");
        results.push_back(executor.execute(ex, decision.category));
        scores[ex.id] = 100.0;
        tokens[ex.id] = 1.0;
    }

    Report report = aggregate("mix", results, scores, tokens, LatencyModel{});
    const double wanted[4] = {24.8, 43.3, 9.5, 22.3};
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) {
        expect_near(report.category_ratios[c], wanted[c], 0.1,
                    std::string("ratio of ") + category_id(kAllCategories[c]));
        sum += report.category_ratios[c];
    }
    expect_near(sum, 100.0, 0.1, "ratios must sum to 100");
}

// ---------------------------------------------------------------------------

void check_prompt_fidelity() {
    std::string planner_text = prompts().render_planner_prompt("any question");
    expect(planner_text.find("My existing knowledge is sufficient to answer this question") !=
               std::string::npos,
           "planner option A text");

    std::string judge_text = prompts().render_judge_prompt("q", "ref", "gen");
    expect(judge_text.find("Your score has to be between 1 and 5") != std::string::npos,
           "judge range sentence");

    std::string rewrite_text = prompts().render_gold_query_with_image_context("q", {});
    expect(rewrite_text.find("Based on the image search results") != std::string::npos,
           "image-context rewrite rubric");

    expect(parse_json_field(R"({"gold_query": "What are the works of Zhao Liying?"})",
                            "gold_query") == "What are the works of Zhao Liying?",
           "documented gold_query reply must round-trip");
    const char* image_reply = R"({"image_query": "Who is this actor?", "image_entity": "Zhao Liying"})";
    expect(parse_json_field(image_reply, "image_query") == "Who is this actor?" &&
               parse_json_field(image_reply, "image_entity") == "Zhao Liying",
           "documented image decomposition reply must round-trip");

    std::string training_text =
        prompts().render_gold_query_training("What are the works of this actress?", "Boss & Me");
    expect(training_text.find(R"({"gold_query": "What are the works of Zhao Liying?"})") !=
               std::string::npos,
           "escaped braces must collapse to the literal example JSON");
}

// ---------------------------------------------------------------------------

void check_failure_paths() {
    // Planner: unusable replies end in the safe route, flagged as fallback.
    MockModelBackend agent;
    agent.add("plan:fb", "I cannot decide between those options");
    Planner planner(agent, prompts());
    PlanDecision decision = planner.plan(make_example("fb"));
    expect(decision.category == Category::both_mrag && decision.used_fallback &&
               decision.attempts == 2,
           "planner must fall back to both searches after two malformed replies");

    // Executor: failed rewrites degrade c2 to a direct answer, c4 to
    // image-only, with the failure flagged.
    for (Category category : {Category::text_mrag, Category::both_mrag}) {
        MockModelBackend task_model;
        MockModelBackend rewrite_model;
        MockSearchBackend retrieval;
        Executor executor(task_model, rewrite_model, retrieval, prompts(), nullptr);
        VqaExample ex = make_example("dg");
        task_model.add("answer:dg", "answer");
        rewrite_model.add("rewrite:dg", "no json in this reply");
        PipelineResult result = executor.execute(ex, category);
        expect(result.rewrite_failed, "degraded run must set rewrite_failed");
        expect(!result.gold_query_used.has_value(), "no gold query on a failed rewrite");
        expect(result.tool_calls.t2t == 0, "degraded run must skip the text search");
        expect(result.tool_calls.rewrite == 1, "the rewrite attempt still counts once");
        expect(result.tool_calls.i2i == (category == Category::both_mrag ? 1 : 0),
               "image search must be unaffected by the rewrite failure");
    }

    // Parsers: arbitrary bytes may fail, but only with typed errors.
    std::mt19937_64 rng(20240817);
    const std::string alphabet =
        " \t\nABCDabcd{}[]():\".,!?0123456789eE+-'`~#$%^&*\\/已知answer score";
    int survived = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::string input;
        std::size_t length = rng() % 120;
        for (std::size_t i = 0; i < length; ++i) input += alphabet[rng() % alphabet.size()];
        for (int parser = 0; parser < 3; ++parser) {
            try {
                if (parser == 0) {
                    (void)category_from_letter(input);
                } else if (parser == 1) {
                    (void)parse_json_field(input, "gold_query");
                } else {
                    (void)parse_judge_score(input);
                }
                ++survived;
            } catch (const Error&) {
            } catch (const std::exception& e) {
                throw std::runtime_error("parser " + std::to_string(parser) +
                                         " leaked an untyped error on fuzz input: " + e.what());
            }
        }
    }
    expect(survived >= 0, "fuzz loop must finish");
}

// ---------------------------------------------------------------------------

void check_class_balancing() {
    AnnotationRig rig;
    std::vector<VqaExample> batch;
    // Five examples per class, plus two contradictory ones.
    const char* probes[4][3] = {
        {"5", "1", "1"}, {"1", "5", "1"}, {"1", "1", "5"}, {"1", "1", "1"}};
    int serial = 0;
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 5; ++i) {
            VqaExample ex = make_example("bal" + std::to_string(serial++), "", "ref");
            add_probe_fixtures(rig.decompose, rig.task, rig.judge_model, ex, probes[c][0],
                               probes[c][1], probes[c][2]);
            batch.push_back(ex);
        }
    }
    for (int i = 0; i < 2; ++i) {
        VqaExample ex = make_example("bal" + std::to_string(serial++), "", "ref");
        add_probe_fixtures(rig.decompose, rig.task, rig.judge_model, ex, "1", "5", "5");
        batch.push_back(ex);
    }

    AnnotatorOptions options;
    for (auto& cap : options.caps) cap = 2;
    options.seed = 3;
    Annotator::BatchResult result = rig.make(options).annotate(batch);

    expect(result.stats.input == 22, "input tally");
    expect(result.stats.retained == std::array<int, 4>{2, 2, 2, 2},
           "every class must be balanced down to its cap");
    expect(result.stats.cap_discarded == std::array<int, 4>{3, 3, 3, 3}, "discard tally");
    expect(result.stats.excluded_total() == 2, "contradictory examples must be excluded");
    expect(result.retained.size() == 8, "retained set size");
    int total = result.stats.total_retained;
    for (int c = 0; c < 4; ++c) total += result.stats.cap_discarded[c];
    expect(total + result.stats.excluded_total() == result.stats.input,
           "input = retained + cap_discarded + excluded must hold");
}

// ---------------------------------------------------------------------------

struct Criterion {
    const char* name;
    std::function<void()> check;
    double budget_seconds;  // 0 = no bound
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"probe truth table labels all eight combos like the oracle", check_probe_truth_table,
         1.0},
        {"each route issues exactly its expected tool calls", check_execution_profiles, 1.0},
        {"modeled search costs match the per-route and mixed sums", check_cost_model, 0.0},
        {"a 12-item mock run yields exact totals and byte-identical reruns", check_end_to_end_run,
         5.0},
        {"judge scores scale 1..5 onto 0..100 and reject out-of-range", check_judge_scaling, 0.0},
        {"a 600-item mix reproduces the published route ratios", check_category_mix, 0.0},
        {"prompt renderings keep the published wording and examples", check_prompt_fidelity, 0.0},
        {"malformed model output degrades routes instead of crashing", check_failure_paths, 0.0},
        {"per-class caps balance retention and keep the partition identity", check_class_balancing,
         0.0},
    };

    int failures = 0;
    int index = 0;
    for (const Criterion& criterion : criteria) {
        ++index;
        auto start = std::chrono::steady_clock::now();
        std::string failure;
        try {
            criterion.check();
        } catch (const std::exception& e) {
            failure = e.what();
        }
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (failure.empty() && criterion.budget_seconds > 0 &&
            elapsed > criterion.budget_seconds) {
            failure = "took " + std::to_string(elapsed) + "s, budget " +
                      std::to_string(criterion.budget_seconds) + "s";
        }
        if (failure.empty()) {
            std::printf("[PASS] %d. %s (%.3fs)\n", index, criterion.name, elapsed);
        } else {
            std::printf("[FAIL] %d. %s (%.3fs): %s\n", index, criterion.name, elapsed,
                        failure.c_str());
            ++failures;
        }
    }
    std::printf("%d/9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
