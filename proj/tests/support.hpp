// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "mrag/backends.hpp"
#include "mrag/core.hpp"
#include "mrag/prompts.hpp"

namespace testsupport {

inline const mrag::PromptLibrary& prompts() {
    static mrag::PromptLibrary lib = mrag::PromptLibrary::load_dir(MRAG_TEST_PROMPTS_DIR);
    return lib;
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mrag-test-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline mrag::VqaExample make_example(const std::string& id, const std::string& question = "",
                                     const std::string& answer = "") {
    mrag::VqaExample ex;
    ex.id = id;
    ex.image = "img://" + id;
    ex.question = question.empty() ? "what is near the landmark in " + id + "?" : question;
    if (!answer.empty()) ex.answer = answer;
    return ex;
}

inline mrag::RetrievedContext make_context(const std::string& tool, int rank,
                                           const std::string& title,
                                           const std::string& snippet = "snippet") {
    mrag::RetrievedContext ctx;
    ctx.source_tool = tool;
    ctx.title = title;
    ctx.snippet = snippet;
    ctx.rank = rank;
    return ctx;
}

/// Wires every chat fixture one annotated example consumes. The probe columns
/// are raw judge replies; "5" passes and "1" fails at the default threshold.
inline void add_probe_fixtures(mrag::MockModelBackend& decompose, mrag::MockModelBackend& task,
                               mrag::MockModelBackend& judge, const mrag::VqaExample& ex,
                               const std::string& bq, const std::string& bi,
                               const std::string& bg) {
    decompose.add("decompose_gold:" + ex.id, R"({"gold_query": "rewritten )" + ex.id + R"("})");
    decompose.add("decompose_image:" + ex.id,
                  R"({"image_query": "what is pictured?", "image_entity": "entity )" + ex.id +
                      R"("})");
    task.add("answer:" + ex.id, "probe answer for " + ex.id);
    task.add("answer:" + ex.id + "#qi", "image probe answer for " + ex.id);
    task.add("answer:" + ex.id + "#qg", "gold probe answer for " + ex.id);
    judge.add("judge:" + ex.id, bq);
    judge.add("judge:" + ex.id + "#qi", bi);
    judge.add("judge:" + ex.id + "#qg", bg);
}

}  // namespace testsupport
