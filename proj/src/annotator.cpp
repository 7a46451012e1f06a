// SPDX-License-Identifier: Apache-2.0
#include "mrag/annotator.hpp"

#include <algorithm>
#include <unordered_map>

#include "mrag/parallel.hpp"

namespace mrag {

const char* exclusion_reason_name(ExclusionReason reason) {
    switch (reason) {
        case ExclusionReason::contradictory_probes: return "CONTRADICTORY_PROBES";
        case ExclusionReason::decomposition_failed: return "DECOMPOSITION_FAILED";
        case ExclusionReason::judge_failed: return "JUDGE_FAILED";
    }
    throw std::invalid_argument("invalid ExclusionReason value");
}

AnnotationLabel label_from_probes(bool bq, bool bi, bool bg) {
    AnnotationLabel label;
    label.bq = bq;
    if (bq) {
        label.category = Category::no_mrag;
        return label;
    }
    label.bi = bi;
    label.bg = bg;
    if (bi && bg) {
        label.exclusion_reason = ExclusionReason::contradictory_probes;
    } else if (bi) {
        label.category = Category::text_mrag;
    } else if (bg) {
        label.category = Category::image_mrag;
    } else {
        label.category = Category::both_mrag;
    }
    return label;
}

AnnotationLabel label_from_probes(const ProbeOutcome& probes) {
    if (probes.bq != (!probes.bi.has_value() && !probes.bg.has_value())) {
        throw std::invalid_argument("bi/bg must be present exactly when bq failed");
    }
    if (probes.bq) return label_from_probes(true, false, false);
    return label_from_probes(false, *probes.bi, *probes.bg);
}

namespace {

nlohmann::ordered_json probe_to_json(const std::optional<bool>& probe) {
    if (!probe) return "skipped";
    return *probe;
}

}  // namespace

nlohmann::ordered_json annotation_record_to_json(const AnnotationRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.example_id;
    if (r.label.category) j["category"] = category_id(*r.label.category);
    j["excluded"] = r.label.excluded();
    if (r.label.exclusion_reason) {
        j["exclusion_reason"] = exclusion_reason_name(*r.label.exclusion_reason);
    }
    j["probes"] = {{"bq", probe_to_json(r.label.bq)},
                   {"bi", probe_to_json(r.label.bi)},
                   {"bg", probe_to_json(r.label.bg)}};
    if (r.decomposition) {
        j["gold_query"] = r.decomposition->gold_query;
        j["image_query"] = r.decomposition->image_query;
        j["image_entity"] = r.decomposition->image_entity;
    }
    return j;
}

int AnnotationStats::excluded_total() const {
    int sum = 0;
    for (const auto& [reason, count] : excluded) sum += count;
    return sum;
}

nlohmann::ordered_json annotation_stats_to_json(const AnnotationStats& s) {
    auto by_category = [](const std::array<int, 4>& counts) {
        nlohmann::ordered_json j;
        for (std::size_t i = 0; i < 4; ++i) j[category_id(kAllCategories[i])] = counts[i];
        return j;
    };
    nlohmann::ordered_json j;
    j["input"] = s.input;
    j["labeled"] = by_category(s.labeled);
    j["retained"] = by_category(s.retained);
    j["cap_discarded"] = by_category(s.cap_discarded);
    j["excluded"] = s.excluded;
    j["excluded_total"] = s.excluded_total();
    j["total_retained"] = s.total_retained;
    return j;
}

Annotator::Annotator(ModelBackend& decompose_model, ModelBackend& task_model, Judge& judge,
                     const PromptLibrary& prompts, AnnotatorOptions options)
    : decompose_model_(decompose_model),
      task_model_(task_model),
      judge_(judge),
      prompts_(prompts),
      options_(options) {
    if (options_.workers < 1) throw std::invalid_argument("workers must be >= 1");
    for (const auto& cap : options_.caps) {
        if (cap && *cap < 0) throw std::invalid_argument("caps must be >= 0");
    }
}

DecompositionRecord Annotator::decompose(const VqaExample& example) {
    auto ask = [&](const std::string& stage, const std::string& rendered,
                   auto&& extract) {
        ModelRequest request;
        request.messages.push_back(make_user_message(rendered, example.image));
        request.fixture_key = stage + ":" + example.id;
        std::string failure;
        for (int attempt = 0; attempt < 2; ++attempt) {
            ModelResponse response = decompose_model_.chat(request);
            try {
                extract(response.text);
                return;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::parse_failed && e.code() != ErrorCode::key_missing &&
                    e.code() != ErrorCode::value_not_string) {
                    throw;
                }
                failure = e.what();
            }
        }
        throw Error(ErrorCode::decomposition_failed,
                    stage + " for example \"" + example.id + "\": " + failure);
    };

    DecompositionRecord record;
    record.example_id = example.id;
    ask("decompose_gold",
        prompts_.render_gold_query_training(example.question, *example.answer),
        [&](const std::string& reply) {
            std::string gold = parse_json_field(reply, "gold_query");
            if (gold.empty() || gold == example.question) {
                throw Error(ErrorCode::parse_failed,
                            "gold_query must be non-empty and differ from the question");
            }
            record.gold_query = gold;
        });
    ask("decompose_image",
        prompts_.render_image_query_prompt(example.question, record.gold_query),
        [&](const std::string& reply) {
            std::string query = parse_json_field(reply, "image_query");
            std::string entity = parse_json_field(reply, "image_entity");
            if (query.empty() || entity.empty()) {
                throw Error(ErrorCode::parse_failed, "image_query/image_entity must be non-empty");
            }
            record.image_query = query;
            record.image_entity = entity;
        });
    return record;
}

bool Annotator::probe_correct(const std::string& fixture_key, const std::string& question,
                              const std::string& image, const std::string& reference) {
    ModelRequest request;
    request.messages.push_back(make_user_message(question, image));
    request.fixture_key = "answer:" + fixture_key;
    ModelResponse response = task_model_.chat(request);
    auto outcome = judge_.judge("judge:" + fixture_key, question, reference, response.text);
    return outcome.raw >= options_.correctness_threshold;
}

AnnotationRecord Annotator::annotate_one(const VqaExample& example) {
    if (!example.answer || example.answer->empty()) {
        throw std::invalid_argument("example \"" + example.id + "\" has no answer to annotate");
    }
    AnnotationRecord record;
    record.example_id = example.id;

    try {
        record.decomposition = decompose(example);
    } catch (const Error&) {
        record.label.exclusion_reason = ExclusionReason::decomposition_failed;
        return record;
    }

    try {
        bool bq = probe_correct(example.id, example.question, example.image, *example.answer);
        if (bq) {
            record.label = label_from_probes(ProbeOutcome{true, std::nullopt, std::nullopt});
            return record;
        }
        // The image probe checks entity recognition (text answer judged
        // against the entity name); the gold probe checks the rewritten
        // question with no image attached.
        bool bi = probe_correct(example.id + "#qi", record.decomposition->image_query,
                                example.image, record.decomposition->image_entity);
        bool bg = probe_correct(example.id + "#qg", record.decomposition->gold_query, "",
                                *example.answer);
        record.label = label_from_probes(ProbeOutcome{false, bi, bg});
    } catch (const Error&) {
        record.label.exclusion_reason = ExclusionReason::judge_failed;
    }
    return record;
}

Annotator::BatchResult Annotator::annotate(const std::vector<VqaExample>& examples) {
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return examples[a].id < examples[b].id;
    });

    std::vector<AnnotationRecord> records(examples.size());
    parallel_for(examples.size(), options_.workers,
                 [&](std::size_t i) { records[i] = annotate_one(examples[order[i]]); });

    BatchResult out;
    out.stats.input = static_cast<int>(examples.size());
    for (const auto& record : records) {
        if (record.label.excluded()) {
            out.stats.excluded[exclusion_reason_name(*record.label.exclusion_reason)] += 1;
        } else {
            out.stats.labeled[static_cast<std::size_t>(*record.label.category) - 1] += 1;
        }
    }

    // Balance each class down to its cap with a seeded draw over the
    // id-ordered candidates.
    std::vector<bool> keep(records.size(), false);
    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!records[i].label.excluded() &&
                records[i].label.category == kAllCategories[c]) {
                candidates.push_back(i);
            }
        }
        std::size_t cap = options_.caps[c]
                              ? static_cast<std::size_t>(*options_.caps[c])
                              : candidates.size();
        if (cap >= candidates.size()) {
            for (std::size_t i : candidates) keep[i] = true;
            out.stats.retained[c] = static_cast<int>(candidates.size());
        } else {
            for (std::size_t pick : sample_indices(candidates.size(), cap,
                                                   options_.seed + static_cast<std::uint64_t>(c))) {
                keep[candidates[pick]] = true;
            }
            out.stats.retained[c] = static_cast<int>(cap);
            out.stats.cap_discarded[c] = static_cast<int>(candidates.size() - cap);
        }
        out.stats.total_retained += out.stats.retained[c];
    }

    for (std::size_t i = 0; i < records.size(); ++i) {
        if (keep[i]) {
            VqaExample retained = examples[order[i]];
            retained.gold_query = records[i].decomposition->gold_query;
            retained.image_query = records[i].decomposition->image_query;
            retained.image_entity = records[i].decomposition->image_entity;
            retained.category = records[i].label.category;
            out.retained.push_back(std::move(retained));
        }
    }
    out.records = std::move(records);
    return out;
}

nlohmann::ordered_json Annotator::training_record(const VqaExample& retained) const {
    if (!retained.category) {
        throw std::invalid_argument("training records need a category label");
    }
    nlohmann::ordered_json j;
    j["messages"] = nlohmann::ordered_json::array();
    j["messages"].push_back({{"role", "user"},
                             {"content", prompts_.render_planner_prompt(retained.question)}});
    j["messages"].push_back(
        {{"role", "assistant"},
         {"content", std::string(1, letter_of(*retained.category)) + "."}});
    j["images"] = nlohmann::ordered_json::array({retained.image});
    j["id"] = retained.id;
    j["category"] = category_id(*retained.category);
    return j;
}

}  // namespace mrag
