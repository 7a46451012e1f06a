// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mrag/core.hpp"

namespace mrag {

enum class ToolKind { i2i, t2t, t2i, rewrite, task };
constexpr std::array<ToolKind, 5> kAllToolKinds = {ToolKind::i2i, ToolKind::t2t, ToolKind::t2i,
                                                   ToolKind::rewrite, ToolKind::task};
const char* tool_kind_name(ToolKind kind);

struct MessagePart {
    enum class Kind { text, image_url };
    Kind kind = Kind::text;
    std::string value;
};

struct ChatMessage {
    std::string role;  // "system", "user", or "assistant"
    std::vector<MessagePart> parts;
};

struct ModelRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    /// Routing key for the mock backend, "{stage}:{example_id}". Live
    /// backends ignore it.
    std::string fixture_key;
};

struct ModelResponse {
    std::string text;
    double latency_seconds = 0.0;
    std::string backend_id;
};

struct SearchResponse {
    std::vector<RetrievedContext> results;
    double latency_seconds = 0.0;
    std::string backend_id;
};

/// Builds a user message from rendered prompt text. A literal <image> token
/// in the text becomes an image part in place; when the text has no token but
/// an image reference is given, the image part is prepended.
ChatMessage make_user_message(std::string_view rendered_text, std::string_view image_ref = {});

/// Throws std::invalid_argument unless the request has at least one user
/// message and image parts appear only in user messages.
void validate_request(const ModelRequest& request);

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual ModelResponse chat(const ModelRequest& request) = 0;
};

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    /// At most top_k results, ranks 1..n, source_tool set from the kind.
    /// Preconditions: top_k >= 1; non-empty query.
    virtual SearchResponse search(ToolKind kind, const std::string& query, int top_k) = 0;
};

/// Thread-safe per-tool call counts and measured seconds.
class LatencyRecorder {
public:
    void record(ToolKind kind, double measured_seconds);
    ToolCallProfile counts() const;
    double seconds(ToolKind kind) const;
    /// Measured i2i + t2t + t2i seconds.
    double search_seconds() const;

private:
    struct Cell {
        int count = 0;
        double seconds = 0.0;
    };
    mutable std::mutex mutex_;
    std::array<Cell, 5> cells_{};
};

/// Retry rule for transient transport failures. Only BACKEND_UNREACHABLE is
/// retried; refusals are final.
struct RetryPolicy {
    int max_attempts = 2;
    double base_delay_seconds = 1.0;
    double factor = 2.0;
};

/// Runs fn under the policy, sleeping base*factor^(attempt-1) between tries.
template <class Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::backend_unreachable || attempt >= policy.max_attempts) {
                throw;
            }
            double delay = policy.base_delay_seconds;
            for (int i = 1; i < attempt; ++i) delay *= policy.factor;
            if (delay > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            }
        }
    }
}

/// Deterministic fixture-backed model. Unknown keys raise FIXTURE_MISS.
/// Keeps a call log so tests can assert call sequences and prompt contents.
class MockModelBackend : public ModelBackend {
public:
    MockModelBackend() = default;
    /// Loads kind=="chat" rows of a fixture file (other kinds are ignored).
    static std::shared_ptr<MockModelBackend> from_fixture_file(const std::filesystem::path& path);

    void add(const std::string& key, const std::string& text, double latency_seconds = 0.0);
    ModelResponse chat(const ModelRequest& request) override;

    std::vector<std::string> call_log() const;
    int call_count(std::string_view key) const;
    /// Concatenated text parts of the last request seen for key.
    std::string last_prompt_text(std::string_view key) const;

private:
    struct Fixture {
        std::string text;
        double latency_seconds = 0.0;
    };
    mutable std::mutex mutex_;
    std::map<std::string, Fixture, std::less<>> fixtures_;
    std::vector<std::string> log_;
    std::map<std::string, std::string, std::less<>> last_prompt_;
};

/// Deterministic fixture-backed retrieval. A query with no fixture entry
/// yields an empty result list (missing evidence is a valid outcome).
class MockSearchBackend : public SearchBackend {
public:
    MockSearchBackend() = default;
    /// Loads kind=="i2i"/"t2t"/"t2i" rows of a fixture file.
    static std::shared_ptr<MockSearchBackend> from_fixture_file(const std::filesystem::path& path);

    void add(ToolKind kind, const std::string& query, std::vector<RetrievedContext> results,
             double latency_seconds = 0.0);
    SearchResponse search(ToolKind kind, const std::string& query, int top_k) override;

private:
    struct Fixture {
        std::vector<RetrievedContext> results;
        double latency_seconds = 0.0;
    };
    mutable std::mutex mutex_;
    std::map<std::string, Fixture, std::less<>> fixtures_;  // key "{kind}:{query}"
};

struct HttpEndpointConfig {
    std::string base_url;  // scheme://host[:port][/prefix]
    std::string api_key;   // resolved secret, empty = no auth header
    std::string model;     // chat backends only
    double timeout_seconds = 60.0;
    RetryPolicy retry;
};

/// Chat-completions wire client: POST {base_url}/chat/completions with a
/// bearer token and text/image_url content parts.
class HttpModelBackend : public ModelBackend {
public:
    explicit HttpModelBackend(HttpEndpointConfig config);
    ModelResponse chat(const ModelRequest& request) override;

private:
    HttpEndpointConfig config_;
};

/// Retrieval wire client: POST {base_url}/search with {tool, query, top_k},
/// expecting {results: [{title, snippet, image?}]}.
class HttpSearchBackend : public SearchBackend {
public:
    explicit HttpSearchBackend(HttpEndpointConfig config);
    SearchResponse search(ToolKind kind, const std::string& query, int top_k) override;

private:
    HttpEndpointConfig config_;
};

}  // namespace mrag
