// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrag/backends.hpp"
#include "mrag/core.hpp"
#include "mrag/evaluator.hpp"
#include "mrag/prompts.hpp"

namespace mrag {

/// The two derived queries plus the named entity for one example.
struct DecompositionRecord {
    std::string example_id;
    std::string gold_query;
    std::string image_query;
    std::string image_entity;
};

/// Correctness probes. bi/bg are unset exactly when bq passed, since a query
/// the model already answers needs no further evidence.
struct ProbeOutcome {
    bool bq = false;
    std::optional<bool> bi;
    std::optional<bool> bg;
};

enum class ExclusionReason { contradictory_probes, decomposition_failed, judge_failed };
const char* exclusion_reason_name(ExclusionReason reason);

/// Category assignment or exclusion for one example. Probes that never ran
/// (short-circuited or aborted by an earlier failure) stay unset and
/// serialize as "skipped".
struct AnnotationLabel {
    std::optional<Category> category;
    std::optional<ExclusionReason> exclusion_reason;
    std::optional<bool> bq;
    std::optional<bool> bi;
    std::optional<bool> bg;

    bool excluded() const { return exclusion_reason.has_value(); }
};

/// Pure truth table over the probe triple:
///   bq=1 -> c1 (bi/bg ignored)
///   (0,1,0) -> c2   (0,0,1) -> c3   (0,0,0) -> c4
///   (0,1,1) -> excluded CONTRADICTORY_PROBES
AnnotationLabel label_from_probes(bool bq, bool bi, bool bg);
/// Same table over a recorded outcome (honoring skipped probes).
AnnotationLabel label_from_probes(const ProbeOutcome& probes);

struct AnnotationRecord {
    std::string example_id;
    AnnotationLabel label;
    std::optional<DecompositionRecord> decomposition;
};

nlohmann::ordered_json annotation_record_to_json(const AnnotationRecord& r);

struct AnnotationStats {
    int input = 0;
    std::array<int, 4> labeled{};        // by category c1..c4
    std::array<int, 4> retained{};
    std::array<int, 4> cap_discarded{};
    std::map<std::string, int> excluded;  // by reason name
    int total_retained = 0;

    int excluded_total() const;
};

nlohmann::ordered_json annotation_stats_to_json(const AnnotationStats& s);

struct AnnotatorOptions {
    double correctness_threshold = 4.0;  // raw judge score
    std::array<std::optional<int>, 4> caps;  // per category, unset = unlimited
    std::uint64_t seed = 0;
    int workers = 1;
};

/// Labels a dataset: decompose each example into gold/image queries, probe
/// the task model's correctness on each variant, apply the truth table, then
/// balance the per-category supply down to the caps.
class Annotator {
public:
    Annotator(ModelBackend& decompose_model, ModelBackend& task_model, Judge& judge,
              const PromptLibrary& prompts, AnnotatorOptions options = {});

    /// Precondition: example.answer present.
    AnnotationRecord annotate_one(const VqaExample& example);

    struct BatchResult {
        std::vector<AnnotationRecord> records;       // by example id
        std::vector<VqaExample> retained;            // with decomposition + category filled in
        AnnotationStats stats;
    };
    /// Per-example failures become exclusions, never batch aborts. Output
    /// ordering is by example id; subsampling is seeded and reproducible.
    BatchResult annotate(const std::vector<VqaExample>& examples);

    /// One SFT chat record: the planner prompt as the user turn, the category
    /// letter as the assistant turn.
    nlohmann::ordered_json training_record(const VqaExample& retained) const;

private:
    DecompositionRecord decompose(const VqaExample& example);
    bool probe_correct(const std::string& fixture_key, const std::string& question,
                       const std::string& image, const std::string& reference);

    ModelBackend& decompose_model_;
    ModelBackend& task_model_;
    Judge& judge_;
    const PromptLibrary& prompts_;
    AnnotatorOptions options_;
};

}  // namespace mrag
