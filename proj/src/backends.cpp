// SPDX-License-Identifier: Apache-2.0
#include "mrag/backends.hpp"

#include <algorithm>

namespace mrag {

const char* tool_kind_name(ToolKind kind) {
    switch (kind) {
        case ToolKind::i2i: return "i2i";
        case ToolKind::t2t: return "t2t";
        case ToolKind::t2i: return "t2i";
        case ToolKind::rewrite: return "rewrite";
        case ToolKind::task: return "task";
    }
    throw std::invalid_argument("invalid ToolKind value");
}

namespace {

ToolKind tool_kind_from_name(std::string_view name) {
    for (ToolKind kind : kAllToolKinds) {
        if (name == tool_kind_name(kind)) return kind;
    }
    throw Error(ErrorCode::bad_input, "unknown tool kind \"" + std::string(name) + "\"");
}

constexpr std::string_view kImageToken = "<image>";

}  // namespace

ChatMessage make_user_message(std::string_view rendered_text, std::string_view image_ref) {
    ChatMessage msg;
    msg.role = "user";
    std::size_t token = rendered_text.find(kImageToken);
    if (token != std::string_view::npos) {
        if (rendered_text.find(kImageToken, token + kImageToken.size()) !=
            std::string_view::npos) {
            throw std::invalid_argument("prompt text has more than one <image> token");
        }
        if (image_ref.empty()) {
            throw std::invalid_argument("prompt text has an <image> token but no image was given");
        }
        std::string_view before = rendered_text.substr(0, token);
        std::string_view after = rendered_text.substr(token + kImageToken.size());
        if (!before.empty()) {
            msg.parts.push_back({MessagePart::Kind::text, std::string(before)});
        }
        msg.parts.push_back({MessagePart::Kind::image_url, std::string(image_ref)});
        if (!after.empty()) {
            msg.parts.push_back({MessagePart::Kind::text, std::string(after)});
        }
        return msg;
    }
    if (!image_ref.empty()) {
        msg.parts.push_back({MessagePart::Kind::image_url, std::string(image_ref)});
    }
    if (!rendered_text.empty()) {
        msg.parts.push_back({MessagePart::Kind::text, std::string(rendered_text)});
    }
    if (msg.parts.empty()) {
        throw std::invalid_argument("user message needs text or an image");
    }
    return msg;
}

void validate_request(const ModelRequest& request) {
    bool has_user = false;
    for (const auto& msg : request.messages) {
        if (msg.role == "user") has_user = true;
        if (msg.role != "user") {
            for (const auto& part : msg.parts) {
                if (part.kind == MessagePart::Kind::image_url) {
                    throw std::invalid_argument("image parts are only allowed in user messages");
                }
            }
        }
    }
    if (!has_user) throw std::invalid_argument("request needs at least one user message");
    if (request.temperature < 0) throw std::invalid_argument("temperature must be >= 0");
    if (request.max_output_tokens <= 0) {
        throw std::invalid_argument("max_output_tokens must be positive");
    }
}

void LatencyRecorder::record(ToolKind kind, double measured_seconds) {
    if (measured_seconds < 0) throw std::invalid_argument("measured_seconds must be >= 0");
    std::lock_guard<std::mutex> lock(mutex_);
    Cell& cell = cells_[static_cast<std::size_t>(kind)];
    cell.count += 1;
    cell.seconds += measured_seconds;
}

ToolCallProfile LatencyRecorder::counts() const {
    std::lock_guard<std::mutex> lock(mutex_);
    ToolCallProfile p;
    p.i2i = cells_[static_cast<std::size_t>(ToolKind::i2i)].count;
    p.t2t = cells_[static_cast<std::size_t>(ToolKind::t2t)].count;
    p.t2i = cells_[static_cast<std::size_t>(ToolKind::t2i)].count;
    p.rewrite = cells_[static_cast<std::size_t>(ToolKind::rewrite)].count;
    p.task = cells_[static_cast<std::size_t>(ToolKind::task)].count;
    return p;
}

double LatencyRecorder::seconds(ToolKind kind) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cells_[static_cast<std::size_t>(kind)].seconds;
}

double LatencyRecorder::search_seconds() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cells_[static_cast<std::size_t>(ToolKind::i2i)].seconds +
           cells_[static_cast<std::size_t>(ToolKind::t2t)].seconds +
           cells_[static_cast<std::size_t>(ToolKind::t2i)].seconds;
}

std::shared_ptr<MockModelBackend> MockModelBackend::from_fixture_file(
    const std::filesystem::path& path) {
    auto backend = std::make_shared<MockModelBackend>();
    for (const auto& row : read_jsonl(path)) {
        if (row.value("kind", "") != "chat") continue;
        if (!row.contains("key") || !row.contains("value") || !row["value"].is_string()) {
            throw Error(ErrorCode::bad_input, path.string() + ": bad chat fixture row");
        }
        backend->add(row["key"].get<std::string>(), row["value"].get<std::string>(),
                     row.value("latency_seconds", 0.0));
    }
    return backend;
}

void MockModelBackend::add(const std::string& key, const std::string& text,
                           double latency_seconds) {
    std::lock_guard<std::mutex> lock(mutex_);
    fixtures_[key] = Fixture{text, latency_seconds};
}

ModelResponse MockModelBackend::chat(const ModelRequest& request) {
    validate_request(request);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = fixtures_.find(request.fixture_key);
    if (it == fixtures_.end()) {
        throw Error(ErrorCode::fixture_miss,
                    "no chat fixture for key \"" + request.fixture_key + "\"");
    }
    log_.push_back(request.fixture_key);
    std::string text;
    for (const auto& msg : request.messages) {
        for (const auto& part : msg.parts) {
            if (part.kind != MessagePart::Kind::text) continue;
            if (!text.empty()) text += '\n';
            text += part.value;
        }
    }
    last_prompt_[request.fixture_key] = std::move(text);
    return ModelResponse{it->second.text, it->second.latency_seconds, "mock"};
}

std::vector<std::string> MockModelBackend::call_log() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
}

int MockModelBackend::call_count(std::string_view key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return static_cast<int>(std::count(log_.begin(), log_.end(), std::string(key)));
}

std::string MockModelBackend::last_prompt_text(std::string_view key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = last_prompt_.find(key);
    return it == last_prompt_.end() ? std::string() : it->second;
}

std::shared_ptr<MockSearchBackend> MockSearchBackend::from_fixture_file(
    const std::filesystem::path& path) {
    auto backend = std::make_shared<MockSearchBackend>();
    for (const auto& row : read_jsonl(path)) {
        std::string kind = row.value("kind", "");
        if (kind == "chat" || kind.empty()) continue;
        ToolKind tool = tool_kind_from_name(kind);
        if (!row.contains("key") || !row.contains("value") || !row["value"].is_array()) {
            throw Error(ErrorCode::bad_input, path.string() + ": bad search fixture row");
        }
        std::vector<RetrievedContext> results;
        for (const auto& item : row["value"]) {
            RetrievedContext ctx;
            ctx.title = item.value("title", "");
            ctx.snippet = item.value("snippet", "");
            ctx.image_ref = item.value("image", "");
            results.push_back(std::move(ctx));
        }
        backend->add(tool, row["key"].get<std::string>(), std::move(results),
                     row.value("latency_seconds", 0.0));
    }
    return backend;
}

void MockSearchBackend::add(ToolKind kind, const std::string& query,
                            std::vector<RetrievedContext> results, double latency_seconds) {
    std::lock_guard<std::mutex> lock(mutex_);
    fixtures_[std::string(tool_kind_name(kind)) + ":" + query] =
        Fixture{std::move(results), latency_seconds};
}

SearchResponse MockSearchBackend::search(ToolKind kind, const std::string& query, int top_k) {
    if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
    if (query.empty()) throw std::invalid_argument("search query must be non-empty");
    std::lock_guard<std::mutex> lock(mutex_);
    SearchResponse response;
    response.backend_id = "mock";
    auto it = fixtures_.find(std::string(tool_kind_name(kind)) + ":" + query);
    if (it == fixtures_.end()) return response;
    response.latency_seconds = it->second.latency_seconds;
    std::size_t n = std::min<std::size_t>(it->second.results.size(),
                                          static_cast<std::size_t>(top_k));
    for (std::size_t i = 0; i < n; ++i) {
        RetrievedContext ctx = it->second.results[i];
        ctx.source_tool = tool_kind_name(kind);
        ctx.rank = static_cast<int>(i) + 1;
        response.results.push_back(std::move(ctx));
    }
    return response;
}

}  // namespace mrag
