// SPDX-License-Identifier: Apache-2.0
#include "mrag/cli.hpp"

#include <cmath>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "mrag/annotator.hpp"
#include "mrag/config.hpp"
#include "mrag/evaluator.hpp"
#include "mrag/executor.hpp"
#include "mrag/parallel.hpp"
#include "mrag/planner.hpp"
#include "mrag/prompts.hpp"

namespace mrag {

namespace {

std::filesystem::path out_path(const RunConfig& config, const char* name) {
    return std::filesystem::path(config.output_dir) / name;
}

std::string dataset_id_of(const RunConfig& config) {
    return std::filesystem::path(config.dataset_path).stem().string();
}

PromptLibrary load_prompts(const RunConfig& config) {
    return PromptLibrary::load_dir(config.prompts_dir.empty()
                                       ? PromptLibrary::default_dir()
                                       : std::filesystem::path(config.prompts_dir));
}

std::vector<VqaExample> load_sorted_dataset(const RunConfig& config) {
    if (config.dataset_path.empty()) {
        throw Error(ErrorCode::bad_input, "no dataset given (use --dataset or the config file)");
    }
    std::vector<VqaExample> examples = load_dataset(config.dataset_path);
    if (examples.empty()) {
        throw Error(ErrorCode::bad_input, "dataset " + config.dataset_path + " is empty");
    }
    std::sort(examples.begin(), examples.end(),
              [](const VqaExample& a, const VqaExample& b) { return a.id < b.id; });
    return examples;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

int effective_top_k(int per_tool, int shared) { return per_tool > 0 ? per_tool : shared; }

int run_annotate(const RunConfig& config) {
    std::vector<VqaExample> examples = load_sorted_dataset(config);
    for (const auto& ex : examples) {
        if (!ex.answer || ex.answer->empty()) {
            throw Error(ErrorCode::bad_input,
                        "example \"" + ex.id + "\" has no answer; annotation needs references");
        }
    }
    PromptLibrary prompts = load_prompts(config);
    auto decompose_model = make_model_backend(config.rewrite, config.mock, "rewrite");
    auto task_model = make_model_backend(config.task, config.mock, "task");
    auto judge_model = make_model_backend(config.judge, config.mock, "judge");
    Judge judge(*judge_model, prompts);

    AnnotatorOptions options;
    options.correctness_threshold = config.correctness_threshold;
    options.caps = config.caps;
    options.seed = config.seed;
    options.workers = config.workers;
    Annotator annotator(*decompose_model, *task_model, judge, prompts, options);

    Annotator::BatchResult batch = annotator.annotate(examples);

    std::vector<nlohmann::ordered_json> train_rows;
    for (const auto& ex : batch.retained) train_rows.push_back(annotator.training_record(ex));
    write_jsonl(out_path(config, "train.jsonl"), train_rows);

    std::vector<nlohmann::ordered_json> annotation_rows;
    for (const auto& record : batch.records) {
        annotation_rows.push_back(annotation_record_to_json(record));
    }
    write_jsonl(out_path(config, "annotations.jsonl"), annotation_rows);

    nlohmann::ordered_json stats = annotation_stats_to_json(batch.stats);
    stats["sources"] = nlohmann::ordered_json::object();
    stats["sources"][dataset_id_of(config)] = {
        {"input", batch.stats.input},
        {"retained", batch.stats.total_retained},
        {"cap_discarded",
         batch.stats.cap_discarded[0] + batch.stats.cap_discarded[1] +
             batch.stats.cap_discarded[2] + batch.stats.cap_discarded[3]},
        {"excluded", batch.stats.excluded_total()}};
    write_json_file(out_path(config, "stats.json"), stats);
    return 0;
}

int run_plan(const RunConfig& config) {
    std::vector<VqaExample> examples = load_sorted_dataset(config);
    PromptLibrary prompts = load_prompts(config);
    auto agent = make_model_backend(config.agent, config.mock, "agent");
    Planner planner(*agent, prompts);

    std::vector<PlanDecision> decisions(examples.size());
    parallel_for(examples.size(), config.workers,
                 [&](std::size_t i) { decisions[i] = planner.plan(examples[i]); });

    std::vector<nlohmann::ordered_json> rows;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        rows.push_back(plan_decision_to_json(examples[i].id, decisions[i]));
    }
    write_jsonl(out_path(config, "plans.jsonl"), rows);
    return 0;
}

int run_run(const RunConfig& config) {
    std::vector<VqaExample> examples = load_sorted_dataset(config);
    PromptLibrary prompts = load_prompts(config);
    auto agent = make_model_backend(config.agent, config.mock, "agent");
    auto task_model = make_model_backend(config.task, config.mock, "task");
    auto rewrite_model = make_model_backend(config.rewrite, config.mock, "rewrite");
    auto retrieval = make_search_backend(config.retrieval, config.mock, "retrieval");

    Planner planner(*agent, prompts);
    LatencyRecorder recorder;
    ExecutorOptions executor_options;
    executor_options.top_k_i2i = effective_top_k(config.top_k_i2i, config.top_k);
    executor_options.top_k_t2t = effective_top_k(config.top_k_t2t, config.top_k);
    Executor executor(*task_model, *rewrite_model, *retrieval, prompts, &recorder,
                      executor_options);

    std::vector<PlanDecision> decisions(examples.size());
    std::vector<PipelineResult> results(examples.size());
    parallel_for(examples.size(), config.workers, [&](std::size_t i) {
        decisions[i] = planner.plan(examples[i]);
        results[i] = executor.execute(examples[i], decisions[i].category);
    });

    std::vector<nlohmann::ordered_json> plan_rows;
    std::vector<nlohmann::ordered_json> result_rows;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        plan_rows.push_back(plan_decision_to_json(examples[i].id, decisions[i]));
        result_rows.push_back(pipeline_result_to_json(results[i]));
    }
    write_jsonl(out_path(config, "plans.jsonl"), plan_rows);
    write_jsonl(out_path(config, "results.jsonl"), result_rows);
    return 0;
}

int run_eval(const RunConfig& config) {
    std::vector<VqaExample> examples = load_sorted_dataset(config);
    std::map<std::string, const VqaExample*> by_id;
    for (const auto& ex : examples) by_id[ex.id] = &ex;

    std::filesystem::path results_path = out_path(config, "results.jsonl");
    std::vector<PipelineResult> results;
    for (const auto& row : read_jsonl(results_path)) {
        results.push_back(pipeline_result_from_json(row));
    }
    if (results.empty()) {
        throw Error(ErrorCode::bad_input, results_path.string() + " has no results");
    }

    PromptLibrary prompts = load_prompts(config);
    auto judge_model = make_model_backend(config.judge, config.mock, "judge");
    Judge judge(*judge_model, prompts);

    std::vector<double> scaled(results.size());
    std::vector<double> token(results.size());
    parallel_for(results.size(), config.workers, [&](std::size_t i) {
        const PipelineResult& r = results[i];
        auto it = by_id.find(r.example_id);
        if (it == by_id.end() || !it->second->answer || it->second->answer->empty()) {
            throw Error(ErrorCode::misaligned_scores,
                        "no reference answer for result \"" + r.example_id + "\"");
        }
        const VqaExample& ex = *it->second;
        scaled[i] = judge.judge("judge:" + r.example_id, ex.question, *ex.answer, r.answer).scaled;
        token[i] = token_accuracy(r.answer, *ex.answer);
    });

    std::map<std::string, double> score_by_id;
    std::map<std::string, double> token_by_id;
    for (std::size_t i = 0; i < results.size(); ++i) {
        score_by_id[results[i].example_id] = scaled[i];
        token_by_id[results[i].example_id] = token[i];
    }
    Report report =
        aggregate(dataset_id_of(config), results, score_by_id, token_by_id, config.latency);
    write_json_file(out_path(config, "report.json"), report_to_json(report));
    write_text_file(out_path(config, "report.md"), report_markdown(report));
    return 0;
}

int run_report(const RunConfig& config) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(out_path(config, "report.json")),
                                             nullptr, false);
    if (j.is_discarded()) {
        throw Error(ErrorCode::bad_input, out_path(config, "report.json").string() +
                                              " is not valid JSON");
    }
    write_text_file(out_path(config, "report.md"), report_markdown(report_from_json(j)));
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Dynamic multimodal-RAG planning pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string dataset;
    std::string out_dir;
    int workers = 0;
    long long seed = -1;
    bool mock = false;
    int top_k = 0;
    double threshold = std::nan("");

    const char* commands[][2] = {
        {"annotate", "Decompose, probe, and label a training dataset"},
        {"plan", "Predict the retrieval category per example"},
        {"run", "Plan and execute the full inference path per example"},
        {"eval", "Judge answers against references and write the report"},
        {"report", "Re-render report.md from an existing report.json"},
    };
    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd[0], cmd[1]);
        sub->add_option("--config", config_path, "Config file (sections + key = value)");
        sub->add_option("--dataset", dataset, "Dataset JSONL path");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--workers", workers, "Worker pool size")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "Subsampling seed")->check(CLI::NonNegativeNumber);
        sub->add_flag("--mock", mock, "Force every backend to its fixtures file");
        sub->add_option("--top-k", top_k, "Retrieval depth per search tool")
            ->check(CLI::PositiveNumber);
        sub->add_option("--threshold", threshold, "Probe correctness threshold (raw 1-5)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) config = load_config(config_path);
        if (!dataset.empty()) config.dataset_path = dataset;
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (workers > 0) config.workers = workers;
        if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
        if (mock) config.mock = true;
        if (top_k > 0) config.top_k = top_k;
        if (!std::isnan(threshold)) config.correctness_threshold = threshold;

        std::string command = app.get_subcommands().front()->get_name();
        if (command == "annotate") return run_annotate(config);
        if (command == "plan") return run_plan(config);
        if (command == "run") return run_run(config);
        if (command == "eval") return run_eval(config);
        return run_report(config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

}  // namespace mrag
